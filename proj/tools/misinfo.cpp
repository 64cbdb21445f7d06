// misinfo: dataset ingestion, explanation generation, the experiment
// service, simulated cohorts, analysis and linguistic reports.

#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "misinfo/analysis.hpp"
#include "misinfo/lingua.hpp"
#include "misinfo/report.hpp"
#include "misinfo/service.hpp"
#include "misinfo/simusers.hpp"

namespace fs = std::filesystem;
using namespace misinfo;

namespace {

constexpr int kExitError = 2;
constexpr int kExitCorrupt = 3;

void refuse_overwrite(const fs::path& path, bool force) {
  if (!force && fs::exists(path))
    throw Error(ErrorCode::AlreadyExists, path.string() + " exists (use --force)");
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::ConfigError, "bind address must be host:port");
  try {
    return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "invalid port in '" + bind + "'");
  }
}

UncertainMode parse_uncertain(const std::string& s) {
  if (s == "incorrect") return UncertainMode::Incorrect;
  if (s == "exclude") return UncertainMode::Exclude;
  throw Error(ErrorCode::ConfigError, "--uncertain must be incorrect or exclude");
}

PreSelection parse_pre(const std::string& s) {
  if (s == "all") return PreSelection::AllPre;
  if (s == "opened") return PreSelection::OpenedOnly;
  throw Error(ErrorCode::ConfigError, "--pre must be all or opened");
}

std::vector<AttributeSet> read_attribute_sets(const fs::path& path,
                                              const std::vector<std::string>& brackets) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  std::vector<AttributeSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_attribute_set(json::parse(line), brackets));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, e.what(), "line " + std::to_string(line_no));
    } catch (const Error& e) {
      throw Error(e.code(), e.message(), "line " + std::to_string(line_no));
    }
  }
  return out;
}

PolicyMix load_policy(const std::string& path) {
  if (path.empty()) return PolicyMix{};
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open policy " + path);
  try {
    return PolicyMix::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("policy: ") + e.what());
  }
}

/// Blocks SIGINT/SIGTERM in every thread started afterwards and stops the
/// server when one arrives.
class ShutdownOnSignal {
 public:
  explicit ShutdownOnSignal(ExperimentServer& server) {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, nullptr);
    waiter_ = std::thread([this, &server] {
      int sig = 0;
      sigwait(&set_, &sig);
      if (sig == SIGINT || sig == SIGTERM) server.stop_listening();
    });
  }
  ~ShutdownOnSignal() {
    pthread_kill(waiter_.native_handle(), SIGTERM);
    waiter_.join();
  }

 private:
  sigset_t set_;
  std::thread waiter_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Misinformation intervention experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  // ingest ------------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Validate a claims file and optionally create a workspace");
  std::string ingest_input, ingest_workspace, ingest_config;
  bool ingest_force = false;
  ingest->add_option("--input", ingest_input, "Claims file (.jsonl or .csv)")->required();
  ingest->add_option("--workspace", ingest_workspace, "Workspace directory to create");
  ingest->add_option("--config", ingest_config, "Experiment config (defaults when omitted)");
  ingest->add_flag("--force", ingest_force, "Overwrite an existing workspace");

  // generate ----------------------------------------------------------------
  auto* generate = app.add_subcommand("generate", "Pre-generate LLM explanations");
  std::string gen_workspace, gen_attrs, gen_out;
  bool gen_force = false;
  generate->add_option("--workspace", gen_workspace, "Workspace directory")->required();
  generate->add_option("--attrs", gen_attrs, "JSON-lines attribute sets for personalized texts");
  generate->add_option("--out", gen_out, "Output file (default: <workspace>/interventions.jsonl)");
  generate->add_flag("--force", gen_force, "Overwrite the output file");

  // serve -------------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "Run the experiment HTTP service");
  std::string serve_workspace, serve_bind = "127.0.0.1:8080";
  bool serve_repair = false;
  serve->add_option("--workspace", serve_workspace, "Workspace directory")->required();
  serve->add_option("--bind", serve_bind, "host:port (port 0 picks a free port)")->capture_default_str();
  serve->add_flag("--repair", serve_repair, "Drop unreadable log lines before starting");

  // simulate ----------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Run a cohort of simulated participants");
  std::string sim_workspace, sim_policy, sim_url, sim_out, sim_claims, sim_config;
  int sim_agents = 100, sim_parallel = 1;
  bool sim_force = false;
  simulate->add_option("--workspace", sim_workspace, "Existing workspace (in-process engine)");
  simulate->add_option("--out", sim_out, "Create a fresh workspace here from --claims/--config");
  simulate->add_option("--claims", sim_claims, "Claims file for --out");
  simulate->add_option("--config", sim_config, "Experiment config for --out");
  simulate->add_option("--url", sim_url, "Drive a running service at host:port instead");
  simulate->add_option("--agents", sim_agents, "Number of agents")->capture_default_str();
  simulate->add_option("--policy", sim_policy, "Agent policy JSON");
  simulate->add_option("--parallel", sim_parallel, "Concurrent sessions")->capture_default_str();
  simulate->add_flag("--force", sim_force, "Replace existing logs under --out");

  // analyze -----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "Print the per-arm effectiveness table");
  std::string an_workspace, an_subset, an_uncertain = "incorrect", an_pre = "all", an_format = "table",
                            an_annotations;
  std::optional<int> an_trial;
  int an_resamples = 10000;
  bool an_no_qc = false;
  analyze->add_option("--workspace", an_workspace, "Workspace directory");
  analyze->add_option("--subset", an_subset, "Claim subset, e.g. topic=medical");
  analyze->add_option("--uncertain", an_uncertain, "incorrect | exclude")->capture_default_str();
  analyze->add_option("--pre", an_pre, "all | opened")->capture_default_str();
  analyze->add_option("--trial", an_trial, "Restrict to one trial");
  analyze->add_option("--format", an_format, "table | json")->capture_default_str();
  analyze->add_option("--resamples", an_resamples, "Bootstrap resamples")->capture_default_str();
  analyze->add_option("--annotations", an_annotations, "Summarize explanation annotations (JSON-lines)");
  analyze->add_flag("--no-qc", an_no_qc, "Skip spam and attention filtering");

  // lingua ------------------------------------------------------------------
  auto* lingua_cmd = app.add_subcommand("lingua", "Linguistic metrics");
  lingua_cmd->require_subcommand(1);
  auto* compare = lingua_cmd->add_subcommand("compare", "Compare metrics across groups");
  std::string lg_input, lg_groups, lg_format = "table", lg_scorer = std::string(lingua::kDefaultScorer);
  compare->add_option("--input", lg_input, "JSON-lines of {group, text}")->required();
  compare->add_option("--groups", lg_groups, "Comma-separated order; the first is the reference");
  compare->add_option("--format", lg_format, "table | json")->capture_default_str();
  compare->add_option("--scorer", lg_scorer, "Formality scorer")->capture_default_str();
  auto* metrics = lingua_cmd->add_subcommand("metrics", "Metrics of one text");
  std::string lg_text;
  metrics->add_option("--text", lg_text, "Text to measure")->required();
  metrics->add_option("--scorer", lg_scorer, "Formality scorer")->capture_default_str();

  // report ------------------------------------------------------------------
  auto* report = app.add_subcommand("report", "Write all report artifacts");
  std::string rp_workspace, rp_out, rp_subset, rp_uncertain = "incorrect", rp_pre = "all";
  bool rp_force = false;
  int rp_resamples = 10000;
  report->add_option("--workspace", rp_workspace, "Workspace directory")->required();
  report->add_option("--out", rp_out, "Output directory")->required();
  report->add_option("--subset", rp_subset, "Claim subset, e.g. topic=medical");
  report->add_option("--uncertain", rp_uncertain, "incorrect | exclude")->capture_default_str();
  report->add_option("--pre", rp_pre, "all | opened")->capture_default_str();
  report->add_option("--resamples", rp_resamples, "Bootstrap resamples")->capture_default_str();
  report->add_flag("--force", rp_force, "Overwrite existing artifacts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto data = load_claims(ingest_input);
      const auto summary = summarize(data);
      std::cout << summary.to_string() << "\n";
      for (const auto& [topic, n] : summary.by_topic) std::cout << "  " << to_string(topic) << ": " << n << "\n";
      if (!ingest_workspace.empty()) {
        auto cfg = ingest_config.empty() ? ExperimentConfig{} : load_config(ingest_config);
        if (app.get_option("--seed")->count()) cfg.seed = seed;
        ExperimentWorkspace::init(ingest_workspace, cfg, data, ingest_force);
        std::cout << "workspace written to " << ingest_workspace << "\n";
      }
      return 0;
    }

    if (*generate) {
      ExperimentWorkspace ws(gen_workspace);
      const auto out_path = gen_out.empty() ? ws.root() / ExperimentWorkspace::kInterventionsFile
                                            : fs::path(gen_out);
      refuse_overwrite(out_path, gen_force);
      const auto& cfg = ws.config();
      std::vector<PromptRequest> requests;
      for (const auto& c : ws.claims()->claims())
        requests.push_back(build_zero_shot_prompt(c, c.veracity, cfg.llm.model_id));
      if (!gen_attrs.empty())
        for (const auto& attrs : read_attribute_sets(gen_attrs, cfg.age_brackets))
          for (const auto& c : ws.claims()->claims())
            requests.push_back(build_personalized_prompt(c, c.veracity, attrs, cfg.llm.model_id));
      ExplanationGenerator gen(ws.llm_client(), GenerationPolicy{cfg.retry_limit, cfg.llm.max_in_flight});
      const auto texts = gen.generate_batch(requests);
      const auto tmp = fs::path(out_path.string() + ".tmp");
      {
        std::ofstream out(tmp);
        for (std::size_t i = 0; i < texts.size(); ++i)
          out << to_output_json({requests[i], texts[i]}).dump() << "\n";
      }
      fs::rename(tmp, out_path);
      int over = 0;
      for (const auto& t : texts) over += t.over_limit;
      std::cout << texts.size() << " explanations written to " << out_path.string() << " (" << over
                << " over the word limit)\n";
      return 0;
    }

    if (*serve) {
      const fs::path root(serve_workspace);
      if (serve_repair) {
        for (auto f : {EventStore::kEventsFile, EventStore::kSessionsFile}) {
          const auto dropped = EventStore::repair(root / ExperimentWorkspace::kLogsDir / f);
          if (dropped) std::cerr << "repair: dropped " << dropped << " bytes from " << f << "\n";
        }
      }
      ExperimentWorkspace ws(root);
      std::shared_ptr<ExperimentEngine> engine;
      try {
        engine = ws.open_engine();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::CorruptLog) throw;
        std::cerr << "error: " << e.what() << (e.detail().empty() ? "" : " (" + e.detail() + ")")
                  << "\nthe log is damaged; to drop the unreadable tail and start, run:\n  "
                  << argv[0] << " serve --workspace " << serve_workspace << " --bind " << serve_bind
                  << " --repair\n";
        return kExitCorrupt;
      }
      ExperimentServer server(engine);
      const auto [host, port] = parse_bind(serve_bind);
      const int bound = server.bind(host, port);
      ShutdownOnSignal shutdown(server);
      std::cout << "listening on " << host << ":" << bound << std::endl;
      server.run();
      std::cout << "stopped; logs flushed" << std::endl;
      return 0;
    }

    if (*simulate) {
      const auto policies = load_policy(sim_policy);
      CohortOptions opt;
      opt.agents = sim_agents;
      opt.seed = seed;
      opt.parallel = sim_parallel;
      CohortResult result;
      if (!sim_url.empty()) {
        if (sim_workspace.empty())
          throw Error(ErrorCode::ConfigError, "--url needs --workspace for the experiment config");
        ExperimentWorkspace ws(sim_workspace);
        opt.table = ws.reference_table();
        auto hp = sim_url.rfind("http://", 0) == 0 ? sim_url.substr(7) : sim_url;
        const auto [host, port] = parse_bind(hp);
        HttpParticipantApi api(host, port);
        result = run_cohort(&api, policies, ws.config(), opt);
      } else {
        fs::path root = sim_workspace;
        if (!sim_out.empty()) {
          if (sim_claims.empty()) throw Error(ErrorCode::ConfigError, "--out needs --claims");
          root = sim_out;
          if (ExperimentWorkspace::has_sessions(root)) {
            refuse_overwrite(root / ExperimentWorkspace::kLogsDir, sim_force);
            fs::remove_all(root / ExperimentWorkspace::kLogsDir);
          }
          auto cfg = sim_config.empty() ? ExperimentConfig{} : load_config(sim_config);
          if (!sim_config.empty()) {
            // Paths inside the config stay relative to the config's directory.
            const auto base = fs::absolute(sim_config).parent_path();
            for (auto* p : {&cfg.reference_table, &cfg.slots_file})
              if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).string();
          }
          ExperimentWorkspace::init(root, cfg, load_claims(sim_claims), true);
        }
        if (root.empty()) throw Error(ErrorCode::ConfigError, "simulate needs --workspace, --out or --url");
        ExperimentWorkspace ws(root);
        opt.table = ws.reference_table();
        auto engine = ws.open_engine();
        EngineApi api(engine);
        result = run_cohort(&api, policies, ws.config(), opt);
        engine->sync();
      }
      std::cout << result.agents.size() << " agents: " << result.completed << " completed, "
                << result.disqualified << " disqualified\n";
      for (const auto& [arm, n] : result.per_arm) std::cout << "  " << to_string(arm) << ": " << n << "\n";
      return 0;
    }

    if (*analyze) {
      if (!an_annotations.empty()) {
        std::ifstream in(an_annotations);
        if (!in) throw Error(ErrorCode::ParseError, "cannot open " + an_annotations);
        std::vector<AnnotationRecord> records;
        std::string line;
        while (std::getline(in, line))
          if (!line.empty()) records.push_back(json::parse(line).get<AnnotationRecord>());
        const auto s = annotation_summary(records);
        auto flag = [](const AnnotationSummary::Flag& f) {
          return json{{"pct", f.pct}, {"n", f.n}, {"ties", f.ties}};
        };
        const json j{{"claims", s.claims},
                     {"erroneous", flag(s.erroneous)},
                     {"commonsense", flag(s.commonsense)},
                     {"event_knowledge", flag(s.event_knowledge)},
                     {"domain_knowledge", flag(s.domain_knowledge)}};
        std::cout << j.dump(2) << "\n";
        return 0;
      }
      if (an_workspace.empty()) throw Error(ErrorCode::ConfigError, "analyze needs --workspace");
      ExperimentWorkspace ws(an_workspace);
      const auto logs = ws.snapshot();
      if (logs.sessions.empty()) throw Error(ErrorCode::EmptySelection, "no sessions in the logs");
      const auto data = prepare_analysis(logs, ws.claims(), ws.config(), !an_no_qc);
      AccuracyOptions acc;
      acc.filter = ClaimFilter::parse(an_subset);
      acc.uncertain = parse_uncertain(an_uncertain);
      acc.pre_selection = parse_pre(an_pre);
      acc.trial = an_trial;
      acc.bootstrap.seed = seed;
      acc.bootstrap.resamples = an_resamples;
      const auto table = subset_report(data, acc);
      if (an_format == "json")
        std::cout << to_json(table).dump(2) << "\n";
      else
        std::cout << format_table(table);
      return 0;
    }

    if (*lingua_cmd) {
      if (*metrics) {
        const auto m = lingua::measure(lg_text, lg_scorer);
        std::cout << json{{"words", m.words},           {"sentences", m.sentences},
                          {"syllables", m.syllables},   {"reading_ease", m.reading_ease},
                          {"fk_grade", m.fk_grade},     {"formality", m.formality}}
                         .dump(2)
                  << "\n";
        return 0;
      }
      std::ifstream in(lg_input);
      if (!in) throw Error(ErrorCode::ParseError, "cannot open " + lg_input);
      const auto groups = lingua::read_grouped_texts(in);
      lingua::CompareOptions co;
      co.scorer = lg_scorer;
      if (!lg_groups.empty()) {
        co.order = detail::split_list(lg_groups);
        co.reference = co.order.front();
      }
      const auto cmp = lingua::group_comparison(groups, co);
      if (lg_format == "json")
        std::cout << lingua::to_json(cmp).dump(2) << "\n";
      else
        std::cout << lingua::format_comparison(cmp);
      return 0;
    }

    if (*report) {
      ExperimentWorkspace ws(rp_workspace);
      ReportOptions ro;
      ro.subset = rp_subset;
      ro.uncertain = parse_uncertain(rp_uncertain);
      ro.pre_selection = parse_pre(rp_pre);
      ro.bootstrap.seed = seed;
      ro.bootstrap.resamples = rp_resamples;
      ro.force = rp_force;
      const auto files = write_reports(ws.snapshot(), ws.claims(), ws.config(), ro, rp_out);
      for (const auto& f : files) std::cout << f.string() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what();
    if (!e.detail().empty()) std::cerr << " (" << e.detail() << ")";
    std::cerr << "\n";
    return e.code() == ErrorCode::CorruptLog ? kExitCorrupt : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
