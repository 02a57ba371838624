#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fgtrac/audit.hpp"
#include "fgtrac/error.hpp"
#include "fgtrac/run.hpp"
#include "test_support.hpp"

namespace fgtrac::run {
namespace {

namespace fs = std::filesystem;
using fgtrac::testing::ScratchDir;

constexpr const char* kSecret = "cli-secret";

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig quick_config() {
  auto cfg = RunConfig::defaults();
  cfg.fixed_clock = true;
  cfg.training.epochs = 5;
  return cfg;
}

struct Cli {
  int code = -1;
  std::string out;
};

Cli cli(const std::string& args, const fs::path& scratch) {
  const auto out_file = scratch / "cli.out";
  const std::string cmd = std::string("FGTRAC_SECRET=") + kSecret + " '" FGTRAC_CLI_PATH "' " + args + " > '" +
                          out_file.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Cli r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  return r;
}

TEST(RunConfig, JsonRoundTripAndDefaults) {
  const auto d = RunConfig::defaults();
  EXPECT_EQ(d.training.num_checkpoints, 3u);
  EXPECT_EQ(d.dataset.n_per_class * d.dataset.classes, 120u);
  const auto back = RunConfig::from_json(d.to_json());
  EXPECT_EQ(back.to_json(), d.to_json());
  auto partial = nlohmann::json::parse(R"({"schema":"fgtrac.run/v1","epochs":4})");
  EXPECT_EQ(RunConfig::from_json(partial).training.epochs, 4);
  EXPECT_EQ(RunConfig::from_json(partial).training.batch_size, d.training.batch_size);
  EXPECT_THROW(RunConfig::from_json(nlohmann::json::parse(R"({"schema":"other/v9"})")), Error);
}

TEST(DemoRun, FixedClockIsByteReproducible) {
  ScratchDir a("run-a");
  ScratchDir b("run-b");
  const auto ra = demo_run(quick_config(), a.path());
  const auto rb = demo_run(quick_config(), b.path());
  EXPECT_EQ(ra.run_id, "run-7");
  EXPECT_EQ(slurp(ra.trace_file), slurp(rb.trace_file));
  EXPECT_EQ(slurp(ra.ledger_file), slurp(rb.ledger_file));
  EXPECT_EQ(slurp(ra.seals_file), slurp(rb.seals_file));
  EXPECT_EQ(ra.training.final_params, rb.training.final_params);
}

TEST(DemoRun, NeverReusesRunDirectory) {
  ScratchDir a("run-exists");
  demo_run(quick_config(), a.path());
  try {
    demo_run(quick_config(), a.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RunExists);
  }
}

TEST(DemoRun, HooksOffGivesIdenticalParams) {
  ScratchDir a("hooks-on");
  ScratchDir b("hooks-off");
  auto on = quick_config();
  auto off = quick_config();
  off.hooks = false;
  EXPECT_EQ(demo_run(on, a.path()).training.final_params, demo_run(off, b.path()).training.final_params);
}

TEST(DemoRun, EverySubjectHasLifecycleCoverageAndNoRawIdsLeakOutsideMappings) {
  ScratchDir a("run-cov");
  const auto art = demo_run(quick_config(), a.path());
  const auto view = RunView::open(art.dir);
  ASSERT_EQ(art.roster.size(), 120u);
  for (const auto& entry : art.roster) {
    bool mapping = false, role = false, trained_or_evaluated = false, predicted = false;
    for (const auto& e : view.store().query_by_subject(entry.subject)) {
      mapping |= e.kind() == trace::EventKind::UserMapping;
      role |= e.kind() == trace::EventKind::TrainingRole;
      if (const auto* act = std::get_if<trace::TrainingActionPayload>(&e.payload)) {
        trained_or_evaluated |= act->epoch.has_value() && !act->members.empty();
        predicted |= act->action == "prediction";
      }
    }
    EXPECT_TRUE(mapping && role && trained_or_evaluated && predicted) << entry.subject.hex();
  }
  EXPECT_EQ(slurp(art.subjects_file).find("subj-"), std::string::npos);
}

TEST(DemoRun, FailureLeavesMarker) {
  ScratchDir a("run-fail");
  auto cfg = quick_config();
  cfg.training.lr = -1.0;
  EXPECT_THROW(demo_run(cfg, a.path()), Error);
  EXPECT_TRUE(fs::exists(a.path() / "run-7" / "FAILED"));
}

TEST(Tamper, TargetNotFoundAndRunExists) {
  ScratchDir a("tamper-err");
  const auto art = demo_run(quick_config(), a.path());
  TamperSpec spec;
  spec.index = 1'000'000;
  try {
    tamper(art.dir, a.path() / "t1", spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TargetNotFound);
  }
  spec.index = 0;
  EXPECT_THROW(tamper(art.dir, art.dir, spec), Error);
}

TEST(Tamper, EveryModeIsDetected) {
  ScratchDir a("tamper-modes");
  const auto art = demo_run(quick_config(), a.path());
  int n = 0;
  for (auto target : {TamperTarget::Event, TamperTarget::Block}) {
    for (auto mode : {TamperMode::FlipBit, TamperMode::DeleteLine, TamperMode::Reorder}) {
      TamperSpec spec;
      spec.target = target;
      spec.mode = mode;
      spec.index = target == TamperTarget::Event ? 7 : 2;
      const auto dst = a.path() / ("t" + std::to_string(n++));
      tamper(art.dir, dst, spec);
      const auto view = RunView::open(dst);
      const audit::Auditor auditor(view.store(), view.ledger(), kSecret);
      EXPECT_TRUE(auditor.integrity().has_value()) << n;
    }
  }
}

TEST(Tamper, SourceRunUntouched) {
  ScratchDir a("tamper-src");
  const auto art = demo_run(quick_config(), a.path());
  const auto before = slurp(art.trace_file);
  TamperSpec spec;
  spec.index = 3;
  tamper(art.dir, a.path() / "t", spec);
  EXPECT_EQ(slurp(art.trace_file), before);
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new ScratchDir("cli");
    std::ofstream(dir_->path() / "cfg.json") << quick_config().to_json().dump();
    const auto r = cli("demo-run --config '" + (dir_->path() / "cfg.json").string() + "' --out '" +
                           (dir_->path() / "runs").string() + "'",
                       dir_->path());
    ASSERT_EQ(r.code, 0) << r.out;
    run_ = dir_->path() / "runs" / "run-7";
    std::istringstream lines(r.out);
    for (std::string line; std::getline(lines, line);) {
      std::istringstream words(line);
      std::string subject, role, token;
      words >> subject >> role >> token;
      if (subject.size() == 64 && token.size() == 64) roster_.push_back({subject, role, token});
    }
  }
  static void TearDownTestSuite() { delete dir_; }

  struct Entry {
    std::string subject, role, token;
  };
  static inline ScratchDir* dir_ = nullptr;
  static inline fs::path run_;
  static inline std::vector<Entry> roster_;

  std::string run() const { return "'" + run_.string() + "'"; }
  std::string path(const std::string& name) const { return "'" + (dir_->path() / name).string() + "'"; }
};

TEST_F(CliTest, DemoRunPrintsRosterWithTokens) { EXPECT_EQ(roster_.size(), 120u); }

TEST_F(CliTest, VerifyLedgerOk) {
  const auto r = cli("verify-ledger " + run(), dir_->path());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.rfind("OK", 0), 0u);
  const auto file = cli("verify-ledger '" + (run_ / "run-7.ledger.ndjson").string() + "'", dir_->path());
  EXPECT_EQ(file.code, 0) << file.out;
}

TEST_F(CliTest, AuditTextAndJson) {
  const auto& e = roster_[0];
  auto r = cli("audit --run " + run() + " --subject " + e.subject + " --token " + e.token, dir_->path());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("Participation Timeline"), std::string::npos);
  r = cli("audit --run " + run() + " --subject " + e.subject + " --token " + e.token + " --format json", dir_->path());
  EXPECT_EQ(r.code, 0);
  EXPECT_NO_THROW(audit::parse_report(r.out.substr(0, r.out.find_last_not_of('\n') + 1)));
}

TEST_F(CliTest, AuditWrongTokenExit3) {
  const auto r = cli("audit --run " + run() + " --subject " + roster_[0].subject + " --token " + roster_[1].token,
                     dir_->path());
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.out.find("Participation"), std::string::npos);
}

TEST_F(CliTest, AuditUnknownSubjectExit4) {
  const auto nobody = hash_id("nobody").hex();
  const auto token = issue_token(kSecret, hash_id("nobody")).token.hex();
  EXPECT_EQ(cli("audit --run " + run() + " --subject " + nobody + " --token " + token, dir_->path()).code, 4);
}

TEST_F(CliTest, TamperedEventAuditExit2) {
  auto r = cli("tamper " + run() + " --event 7 --mode flip-bit --out " + path("flip7"), dir_->path());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto view = RunView::open(run_);
  const auto ev = view.store().event(7);
  ASSERT_TRUE(ev && ev->subject);
  const auto subject = ev->subject->hex();
  const auto token = issue_token(kSecret, *ev->subject).token.hex();
  r = cli("audit --run " + path("flip7") + " --subject " + subject + " --token " + token, dir_->path());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("TamperingDetected"), std::string::npos);
  EXPECT_EQ(r.out.find("Participation"), std::string::npos);
}

TEST_F(CliTest, DeletedEventReportsLeafCountMismatch) {
  ASSERT_EQ(cli("tamper " + run() + " --event 50 --mode delete-line --out " + path("del50"), dir_->path()).code, 0);
  const auto r = cli("verify-ledger " + path("del50"), dir_->path());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("BatchMismatch"), std::string::npos) << r.out;
}

TEST_F(CliTest, ReorderedBlocksBrokenAt) {
  ASSERT_EQ(cli("tamper " + run() + " --block 2 --mode reorder --out " + path("reorder"), dir_->path()).code, 0);
  const auto r = cli("verify-ledger " + path("reorder"), dir_->path());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("BrokenAt 2"), std::string::npos) << r.out;
}

TEST_F(CliTest, ExportAndVerifyReport) {
  auto r = cli("export-report --run " + run() + " --out " + path("reports") + " --format json", dir_->path());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto index = nlohmann::json::parse(slurp(dir_->path() / "reports" / "index.json"));
  EXPECT_EQ(index.at("reports").size(), 120u);
  const auto report = (dir_->path() / "reports" / (roster_[5].subject + ".json")).string();
  r = cli("verify-report --report '" + report + "' --ledger " + run(), dir_->path());
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST_F(CliTest, IssueTokenMatchesLibrary) {
  const auto r = cli("issue-token --subject " + roster_[2].subject, dir_->path());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, roster_[2].token + "\n");
}

TEST_F(CliTest, ReadOnlyCommandsLeaveRunUnchanged) {
  const auto trace = slurp(run_ / "run-7.trace.ndjson");
  const auto ledger = slurp(run_ / "run-7.ledger.ndjson");
  cli("verify-ledger " + run(), dir_->path());
  cli("audit --run " + run() + " --subject " + roster_[0].subject + " --token " + roster_[0].token, dir_->path());
  EXPECT_EQ(slurp(run_ / "run-7.trace.ndjson"), trace);
  EXPECT_EQ(slurp(run_ / "run-7.ledger.ndjson"), ledger);
}

}  // namespace
}  // namespace fgtrac::run
