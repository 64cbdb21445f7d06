#include <gtest/gtest.h>

#include "misinfo/report.hpp"
#include "misinfo/service.hpp"
#include "misinfo/simusers.hpp"
#include "support.hpp"

using namespace misinfo;
using testing_support::data_file;
using testing_support::TempDir;

namespace {

ExperimentConfig workspace_config() {
  ExperimentConfig c;
  c.arms = {{InterventionArm::LabelOnly, 1.0},
            {InterventionArm::LLMZeroShot, 1.0},
            {InterventionArm::LLMPersonalized, 1.0}};
  c.seed = 5;
  c.logical_clock = true;
  c.fsync_every = 100;
  c.reference_table = data_file("reference_table.json").string();
  c.slots_file = data_file("slots.json").string();
  return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::BindError;
}

struct Served {
  TempDir dir{"svc"};
  std::shared_ptr<ExperimentEngine> engine;
  std::unique_ptr<ExperimentServer> server;
  int port = 0;

  Served() {
    ExperimentWorkspace::init(dir.path(), workspace_config(),
                              load_claims(data_file("claims.jsonl")), false);
    engine = ExperimentWorkspace(dir.path()).open_engine();
    server = std::make_unique<ExperimentServer>(engine);
    port = server->bind("127.0.0.1", 0);
    server->start_background();
  }
  ~Served() { server->stop(); }
};

}  // namespace

TEST(Http, AgentsRunOverTheWire) {
  Served s;
  HttpParticipantApi api("127.0.0.1", s.port);
  EXPECT_EQ(api.health()["status"], "ok");
  const auto cfg = s.engine->config();
  CohortOptions opt{12, 3, 1, "web", std::make_shared<const ReferenceTable>(testing_support::reference_table())};
  const auto r = run_cohort(&api, {}, cfg, opt);
  EXPECT_EQ(r.completed, 12);
  EXPECT_EQ(api.health()["sessions"], 12);
  s.engine->sync();
  const auto snap = EventStore::replay(s.dir / ExperimentWorkspace::kLogsDir);
  EXPECT_EQ(snap.sessions.size(), 12u);
  for (const auto& [sid, rec] : snap.sessions) EXPECT_EQ(rec.stage, Stage::Done);
}

TEST(Http, ErrorsMapToStatusCodes) {
  Served s;
  HttpParticipantApi api("127.0.0.1", s.port);
  EXPECT_EQ(code_of([&] { api.feed("s999999"); }), ErrorCode::UnknownSession);
  const auto created = api.create_session("u1");
  EXPECT_EQ(code_of([&] { api.feed(created.session_id); }), ErrorCode::StageViolation);

  httplib::Client raw("127.0.0.1", s.port);
  auto res = raw.Get("/sessions/nope/feed");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  res = raw.Post("/sessions/" + created.session_id + "/instructions", "{}", "application/json");
  EXPECT_EQ(res->status, 409);
  res = raw.Post("/sessions", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
  res = raw.Post("/sessions", "{}", "application/json");
  EXPECT_EQ(res->status, 400);
  res = raw.Get("/reports/live");
  ASSERT_EQ(res->status, 200);
  EXPECT_TRUE(json::parse(res->body).contains("arms"));
}

TEST(Http, StatusTable) {
  EXPECT_EQ(http_status(ErrorCode::UnknownClaim), 404);
  EXPECT_EQ(http_status(ErrorCode::PhaseViolation), 409);
  EXPECT_EQ(http_status(ErrorCode::ProviderError), 503);
  EXPECT_EQ(http_status(ErrorCode::ParseError), 400);
}

TEST(Workspace, InitRefusesOverwriteAndFreezes) {
  TempDir dir("ws");
  const auto claims = load_claims(data_file("claims.jsonl"));
  ExperimentWorkspace::init(dir.path(), workspace_config(), claims, false);
  EXPECT_EQ(code_of([&] { ExperimentWorkspace::init(dir.path(), workspace_config(), claims, false); }),
            ErrorCode::AlreadyExists);
  EXPECT_NO_THROW(ExperimentWorkspace::init(dir.path(), workspace_config(), claims, true));

  ExperimentWorkspace ws(dir.path());
  EXPECT_EQ(ws.config().seed, 5u);
  EXPECT_EQ(ws.claims()->size(), 373u);
  {
    auto engine = ws.open_engine();
    engine->create_session("u1");
    engine->sync();
  }
  EXPECT_TRUE(ExperimentWorkspace::has_sessions(dir.path()));
  EXPECT_EQ(code_of([&] { ExperimentWorkspace::init(dir.path(), workspace_config(), claims, true); }),
            ErrorCode::AlreadyExists);
  TempDir empty("ws");
  EXPECT_EQ(code_of([&] { ExperimentWorkspace ws2(empty.path()); }), ErrorCode::ConfigError);
}

TEST(Reports, ArtifactsAndNoSilentOverwrite) {
  TempDir dir("rep");
  const auto claims = load_claims(data_file("claims.jsonl"));
  ExperimentWorkspace::init(dir.path(), workspace_config(), claims, false);
  ExperimentWorkspace ws(dir.path());
  {
    auto engine = ws.open_engine();
    EngineApi api(engine);
    CohortOptions opt{90, 8, 1, "rep", ws.reference_table()};
    run_cohort(&api, {}, ws.config(), opt);
    engine->sync();
  }
  ReportOptions ro;
  ro.bootstrap.resamples = 300;
  const auto out = dir / "reports";
  const auto files = write_reports(ws.snapshot(), ws.claims(), ws.config(), ro, out);
  for (const char* f : {"effectiveness.json", "effectiveness.txt", "alignment.json",
                        "alignment_points.csv", "helpfulness_bands.json", "linguistic.json",
                        "linguistic.txt"})
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  EXPECT_EQ(files.size(), 9u);
  const auto eff = json::parse(testing_support::slurp(out / "effectiveness.json"));
  EXPECT_EQ(eff["subset"], "all");
  EXPECT_EQ(code_of([&] { write_reports(ws.snapshot(), ws.claims(), ws.config(), ro, out); }),
            ErrorCode::AlreadyExists);
  ro.force = true;
  EXPECT_NO_THROW(write_reports(ws.snapshot(), ws.claims(), ws.config(), ro, out));
  EXPECT_EQ(code_of([&] { write_reports({}, ws.claims(), ws.config(), ro, dir / "none"); }),
            ErrorCode::EmptySelection);
}
