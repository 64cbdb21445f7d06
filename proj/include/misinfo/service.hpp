#pragma once

// Experiment workspace on disk, the HTTP service hosting the engine, and an
// HTTP implementation of ParticipantApi.
//
// Workspace layout:
//   <root>/experiment.ini       ExperimentConfig (relative paths resolve here)
//   <root>/claims.jsonl         ingested claims
//   <root>/interventions.jsonl  optional pre-generated explanations (cache)
//   <root>/logs/                event store

#include <csignal>
#include <filesystem>
#include <fstream>
#include <memory>
#include <regex>
#include <string>
#include <thread>

#include <httplib.h>

#include "misinfo/config.hpp"
#include "misinfo/dataset.hpp"
#include "misinfo/engine.hpp"
#include "misinfo/event_store.hpp"
#include "misinfo/http_llm_client.hpp"
#include "misinfo/interventions.hpp"
#include "misinfo/personalization.hpp"
#include "misinfo/simusers.hpp"

namespace misinfo {

// ---------------------------------------------------------------------------
// Wire formats

inline json to_json(const CreatedSession& s) {
  std::vector<std::string> feed = s.feed;
  return json{{"session_id", s.session_id}, {"arm", to_string(s.arm)}, {"feed", feed}};
}

inline CreatedSession created_session_from_json(const json& j) {
  return {j.at("session_id").get<std::string>(), parse_arm(j.at("arm").get<std::string>()),
          j.at("feed").get<std::vector<std::string>>()};
}

inline json to_json(const Step1View& v) {
  return json{{"claim_id", v.claim_id}, {"question", v.question}, {"options", v.options}};
}

inline json to_json(const Step2View& v) {
  json j{{"claim_id", v.claim_id},
         {"arm", to_string(v.arm)},
         {"label", v.label ? json(to_string(*v.label)) : json(nullptr)},
         {"explanation", v.explanation},
         {"asks_helpfulness", v.asks_helpfulness},
         {"question", v.question}};
  j["audience"] = v.audience ? json(*v.audience) : json(nullptr);
  return j;
}

inline Step2View step2_from_json(const json& j) {
  Step2View v;
  v.claim_id = j.at("claim_id").get<std::string>();
  v.arm = parse_arm(j.at("arm").get<std::string>());
  if (!j.at("label").is_null()) v.label = parse_veracity(j.at("label").get<std::string>());
  v.explanation = j.value("explanation", std::string{});
  v.asks_helpfulness = j.value("asks_helpfulness", false);
  if (j.contains("audience") && !j.at("audience").is_null())
    v.audience = parse_attribute_set(j.at("audience"));
  return v;
}

inline json to_json(const CompletionResult& r) {
  return json{{"accepted", r.accepted},
              {"distinct_interactions", r.distinct_interactions},
              {"required", r.required}};
}

inline json to_json(const QuestionnaireSubmission& q) {
  return json{{"self_reported", q.self_reported},
              {"survey_answers", q.survey_answers},
              {"attention",
               {{"min_interactions", q.attention_min_interactions},
                {"feed_size", q.attention_feed_size}}}};
}

inline QuestionnaireSubmission questionnaire_from_json(const json& j,
                                                       const std::vector<std::string>& brackets) {
  QuestionnaireSubmission q;
  q.self_reported = parse_attribute_set(j.value("self_reported", json::object()), brackets);
  q.survey_answers = j.value("survey_answers", std::vector<SurveyAnswer>{});
  const auto& att = j.at("attention");
  auto text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  q.attention_min_interactions = text(att.at("min_interactions"));
  q.attention_feed_size = text(att.at("feed_size"));
  return q;
}

inline json to_json(const EventInput& e) {
  json j{{"claim_id", e.claim_id}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
  if (e.phase) j["phase"] = to_string(*e.phase);
  return j;
}

inline EventInput event_input_from_json(const json& j) {
  EventInput e;
  e.claim_id = j.value("claim_id", std::string{});
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  if (j.contains("payload")) e.payload = j.at("payload").get<EventPayload>();
  if (j.contains("phase") && !j.at("phase").is_null())
    e.phase = parse_phase(j.at("phase").get<std::string>());
  return e;
}

inline json error_json(const Error& e) {
  return json{{"code", to_string(e.code())}, {"message", e.message()}, {"detail", e.detail()}};
}

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownClaim: return 404;
    case ErrorCode::StageViolation:
    case ErrorCode::PhaseViolation:
    case ErrorCode::OutOfOrder:
    case ErrorCode::AlreadyExists: return 409;
    case ErrorCode::ProviderError:
    case ErrorCode::EngineUnavailable: return 503;
    case ErrorCode::CorruptLog:
    case ErrorCode::MissingSlots: return 500;
    default: return 400;
  }
}

// ---------------------------------------------------------------------------
// Workspace

class ExperimentWorkspace {
 public:
  static constexpr const char* kConfigFile = "experiment.ini";
  static constexpr const char* kClaimsFile = "claims.jsonl";
  static constexpr const char* kInterventionsFile = "interventions.jsonl";
  static constexpr const char* kLogsDir = "logs";

  explicit ExperimentWorkspace(std::filesystem::path root) : root_(std::move(root)) {
    const auto cfg_path = root_ / kConfigFile;
    if (!std::filesystem::exists(cfg_path))
      throw Error(ErrorCode::ConfigError, "no " + std::string(kConfigFile) + " in " + root_.string());
    config_ = load_config(cfg_path.string());
    const auto claims_path = root_ / kClaimsFile;
    if (!std::filesystem::exists(claims_path))
      throw Error(ErrorCode::ConfigError, "no claims in " + root_.string() + " (run ingest)");
    claims_ = std::make_shared<const Dataset>(load_claims(claims_path));
  }

  /// Creates or refreshes a workspace. The config may not change once
  /// sessions have been logged.
  static void init(const std::filesystem::path& root, const ExperimentConfig& config,
                   const Dataset& claims, bool force) {
    std::filesystem::create_directories(root);
    const auto cfg_path = root / kConfigFile;
    const auto claims_path = root / kClaimsFile;
    if (!force && (std::filesystem::exists(cfg_path) || std::filesystem::exists(claims_path)))
      throw Error(ErrorCode::AlreadyExists, root.string() + " already holds a workspace (use --force)");
    if (has_sessions(root))
      throw Error(ErrorCode::AlreadyExists,
                  "sessions already exist in " + root.string() + "; the experiment is frozen");
    {
      std::ofstream out(cfg_path);
      out << format_config(config);
    }
    std::ofstream out(claims_path);
    write_claims_jsonl(out, claims);
  }

  static bool has_sessions(const std::filesystem::path& root) {
    const auto p = root / kLogsDir / EventStore::kSessionsFile;
    return std::filesystem::exists(p) && std::filesystem::file_size(p) > 0;
  }

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path logs_dir() const { return root_ / kLogsDir; }
  const ExperimentConfig& config() const { return config_; }
  std::shared_ptr<const Dataset> claims() const { return claims_; }

  std::filesystem::path resolve(const std::string& path) const {
    std::filesystem::path p(path);
    return p.is_absolute() ? p : root_ / p;
  }

  std::shared_ptr<const ReferenceTable> reference_table() const {
    if (config_.reference_table.empty()) return nullptr;
    auto t = ReferenceTable::load(resolve(config_.reference_table).string());
    if (config_.uniform_prior) t.set_uniform_prior();
    return std::make_shared<const ReferenceTable>(std::move(t));
  }

  std::shared_ptr<const SlotProvider> slot_provider() const {
    if (config_.slots_file.empty()) return nullptr;
    std::ifstream in(resolve(config_.slots_file));
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open slots file " + config_.slots_file);
    return std::make_shared<LookupSlotProvider>(LookupSlotProvider::from_json(json::parse(in)));
  }

  std::shared_ptr<LlmClient> llm_client() const {
    if (config_.llm.provider == "mock") return std::make_shared<MockLlmClient>();
    LlmEndpointConfig ep;
    ep.base_url = config_.llm.base_url;
    ep.path = config_.llm.path;
    ep.model_id = config_.llm.model_id;
    ep.api_key_env = config_.llm.api_key_env;
    return std::make_shared<HttpLlmClient>(ep);
  }

  /// Generator whose cache is primed from interventions.jsonl when present.
  std::shared_ptr<ExplanationGenerator> generator() const {
    const bool needs_llm = config_.has_arm(InterventionArm::LLMZeroShot) ||
                           config_.has_arm(InterventionArm::LLMPersonalized);
    if (!needs_llm) return nullptr;
    auto gen = std::make_shared<ExplanationGenerator>(
        llm_client(), GenerationPolicy{config_.retry_limit, config_.llm.max_in_flight});
    prime_cache(*gen);
    return gen;
  }

  void prime_cache(ExplanationGenerator& gen) const {
    std::ifstream in(root_ / kInterventionsFile);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      const auto& claim = claims_->at(j.at("claim_id").get<std::string>());
      const auto label = parse_veracity(j.at("label").get<std::string>());
      const auto model = j.value("model_id", config_.llm.model_id);
      const bool personalized = j.contains("attrs") && !j.at("attrs").is_null();
      auto req = personalized ? build_personalized_prompt(claim, label,
                                                          parse_attribute_set(j.at("attrs"),
                                                                              config_.age_brackets),
                                                          model)
                              : build_zero_shot_prompt(claim, label, model);
      InterventionText t;
      t.claim_id = claim.id;
      t.arm = req.template_id;
      t.label_shown = label;
      t.explanation = j.at("explanation").get<std::string>();
      t.generation_attrs = req.attrs;
      t.word_count = j.value("word_count", text::word_count(t.explanation));
      t.over_limit = j.value("over_limit", false);
      gen.prime(req, std::move(t));
    }
  }

  std::shared_ptr<ExperimentEngine> open_engine(Clock clock = {}) const {
    auto store = std::make_shared<EventStore>(logs_dir(), config_.fsync_every);
    auto provider = std::make_shared<InterventionProvider>(generator(), slot_provider(),
                                                           config_.llm.model_id);
    return std::make_shared<ExperimentEngine>(config_, claims_, provider, store, std::move(clock),
                                              reference_table());
  }

  LogSnapshot snapshot() const { return EventStore::replay(logs_dir()); }

 private:
  std::filesystem::path root_;
  ExperimentConfig config_;
  std::shared_ptr<const Dataset> claims_;
};

// ---------------------------------------------------------------------------
// HTTP service

class ExperimentServer {
 public:
  explicit ExperimentServer(std::shared_ptr<ExperimentEngine> engine) : engine_(std::move(engine)) {
    server_.set_tcp_nodelay(true);
    routes();
  }

  ~ExperimentServer() { stop(); }

  /// Binds without serving yet; port 0 picks a free port.
  int bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
      bound = server_.bind_to_any_port(host);
    } else if (!server_.bind_to_port(host, port)) {
      bound = -1;
    }
    if (bound <= 0)
      throw Error(ErrorCode::BindError, "cannot bind " + host + ":" + std::to_string(port));
    port_ = bound;
    return bound;
  }

  int port() const { return port_; }

  /// Serves until stop(); flushes the logs on the way out.
  void run() {
    server_.listen_after_bind();
    engine_->sync();
  }

  void start_background() {
    thread_ = std::thread([this] { run(); });
    server_.wait_until_ready();
  }

  /// Safe from any thread; run() returns once in-flight requests finish.
  void stop_listening() {
    if (server_.is_running()) server_.stop();
  }

  void stop() {
    stop_listening();
    if (thread_.joinable()) thread_.join();
  }

 private:
  template <typename Fn>
  void handle(const httplib::Request&, httplib::Response& res, Fn&& fn) {
    try {
      json body = fn();
      res.set_content(body.dump(), "application/json");
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(error_json(e).dump(), "application/json");
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(error_json(Error(ErrorCode::ParseError, e.what())).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"code", "Internal"}, {"message", e.what()}, {"detail", ""}}.dump(),
                      "application/json");
    }
  }

  static json body_of(const httplib::Request& req) {
    return req.body.empty() ? json::object() : json::parse(req.body);
  }

  void routes() {
    auto& e = *engine_;
    const auto& cfg = e.config();

    server_.Get("/health", [&](const auto& req, auto& res) {
      handle(req, res, [&] { return json{{"status", "ok"}, {"sessions", e.session_ids().size()}}; });
    });

    server_.Get("/reports/live", [&](const auto& req, auto& res) {
      handle(req, res, [&] {
        json arms = json::object();
        for (const auto& [arm, c] : e.live_counts())
          arms[std::string(to_string(arm))] = {{"sessions", c.first}, {"done", c.second}};
        return json{{"arms", arms}};
      });
    });

    server_.Post("/sessions", [&](const auto& req, auto& res) {
      handle(req, res, [&] {
        const auto body = body_of(req);
        const auto user = body.value("user_id", std::string{});
        if (user.empty()) throw Error(ErrorCode::ParseError, "user_id is required");
        auto j = to_json(e.create_session(user));
        j["stage"] = to_string(Stage::Consent);
        return j;
      });
    });

    server_.Get(R"(/sessions/([^/]+))", [&](const auto& req, auto& res) {
      handle(req, res, [&] {
        const auto s = e.session(req.matches[1]);
        return json{{"session_id", s.session_id()},
                    {"arm", to_string(s.record.arm)},
                    {"stage", to_string(s.stage())},
                    {"feed", s.record.feed},
                    {"interactions_done", s.interaction_count()},
                    {"min_interactions", cfg.min_interactions},
                    {"can_submit", s.interaction_count() >= cfg.min_interactions}};
      });
    });

    server_.Post(R"(/sessions/([^/]+)/consent)", [&](const auto& req, auto& res) {
      handle(req, res, [&] {
        e.accept_consent(req.matches[1]);
        return json{{"stage", to_string(Stage::Instructions)}};
      });
    });

    server_.Post(R"(/sessions/([^/]+)/instructions)", [&](const auto& req, auto& res) {
      handle(req, res, [&] {
        e.complete_instructions(req.matches[1]);
        return json{{"stage", to_string(Stage::Questionnaire)},
                    {"feed_size", cfg.feed_size},
                    {"min_interactions", cfg.min_interactions}};
      });
    });

    server_.Post(R"(/sessions/([^/]+)/questionnaire)", [&](const auto& req, auto& res) {
      handle(req, res, [&] {
        const auto q = questionnaire_from_json(body_of(req), cfg.age_brackets);
        const bool passed = e.submit_questionnaire(req.matches[1], q);
        return json{{"passed", passed},
                    {"stage", to_string(passed ? Stage::Feed : Stage::Disqualified)}};
      });
    });

    server_.Get(R"(/sessions/([^/]+)/feed)", [&](const auto& req, auto& res) {
      handle(req, res, [&] {
        const std::string sid = req.matches[1];
        const auto claims = e.feed(sid);
        const auto s = e.session(sid);
        return json{{"claims", claims},
                    {"feed_size", cfg.feed_size},
                    {"min_interactions", cfg.min_interactions},
                    {"interactions_done", s.interaction_count()},
                    {"can_submit", s.interaction_count() >= cfg.min_interactions}};
      });
    });

    server_.Post(R"(/sessions/([^/]+)/events)", [&](const auto& req, auto& res) {
      handle(req, res, [&] {
        return json(e.record_event(req.matches[1], event_input_from_json(body_of(req))));
      });
    });

    server_.Get(R"(/sessions/([^/]+)/intervention/([^/]+)/step1)", [&](const auto& req, auto& res) {
      handle(req, res, [&] { return to_json(e.intervention_step1(req.matches[1], req.matches[2])); });
    });

    auto step2 = [&](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, [&] { return to_json(e.intervention_step2(req.matches[1], req.matches[2])); });
    };
    server_.Get(R"(/sessions/([^/]+)/intervention/([^/]+)/step2)", step2);
    server_.Post(R"(/sessions/([^/]+)/intervention/([^/]+)/step2)", step2);

    server_.Post(R"(/sessions/([^/]+)/submit)", [&](const auto& req, auto& res) {
      handle(req, res, [&] { return to_json(e.submit(req.matches[1])); });
    });
  }

  std::shared_ptr<ExperimentEngine> engine_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP participant client

class HttpParticipantApi : public ParticipantApi {
 public:
  HttpParticipantApi(const std::string& host, int port) : client_(host, port) {
    client_.set_keep_alive(true);
    client_.set_tcp_nodelay(true);
    client_.set_read_timeout(30, 0);
  }

  CreatedSession create_session(const std::string& user_id) override {
    return created_session_from_json(post("/sessions", json{{"user_id", user_id}}));
  }
  void accept_consent(const std::string& sid) override { post("/sessions/" + sid + "/consent", {}); }
  void complete_instructions(const std::string& sid) override {
    post("/sessions/" + sid + "/instructions", {});
  }
  bool submit_questionnaire(const std::string& sid, const QuestionnaireSubmission& q) override {
    return post("/sessions/" + sid + "/questionnaire", to_json(q)).at("passed").get<bool>();
  }
  std::vector<Claim> feed(const std::string& sid) override {
    return get("/sessions/" + sid + "/feed").at("claims").get<std::vector<Claim>>();
  }
  void record_event(const std::string& sid, const EventInput& e) override {
    post("/sessions/" + sid + "/events", to_json(e));
  }
  Step1View intervention_step1(const std::string& sid, const std::string& cid) override {
    const auto j = get("/sessions/" + sid + "/intervention/" + cid + "/step1");
    Step1View v;
    v.claim_id = j.at("claim_id").get<std::string>();
    return v;
  }
  Step2View intervention_step2(const std::string& sid, const std::string& cid) override {
    return step2_from_json(post("/sessions/" + sid + "/intervention/" + cid + "/step2", {}));
  }
  CompletionResult submit(const std::string& sid) override {
    const auto j = post("/sessions/" + sid + "/submit", {});
    return {j.at("accepted").get<bool>(), j.at("distinct_interactions").get<int>(),
            j.at("required").get<int>()};
  }

  json health() { return get("/health"); }

 private:
  json get(const std::string& path) {
    std::lock_guard lock(mutex_);
    return unwrap(client_.Get(path), path);
  }

  json post(const std::string& path, const json& body) {
    std::lock_guard lock(mutex_);
    return unwrap(client_.Post(path, body.is_null() ? "{}" : body.dump(), "application/json"), path);
  }

  static json unwrap(const httplib::Result& res, const std::string& path) {
    if (!res)
      throw Error(ErrorCode::EngineUnavailable,
                  "request " + path + " failed: " + httplib::to_string(res.error()));
    json body = res->body.empty() ? json::object() : json::parse(res->body);
    if (res->status != 200) {
      const auto code = parse_error_code(body.value("code", std::string{}));
      throw Error(code.value_or(ErrorCode::EngineUnavailable), body.value("message", res->body),
                  body.value("detail", std::string{}));
    }
    return body;
  }

  httplib::Client client_;
  std::mutex mutex_;
};

}  // namespace misinfo
