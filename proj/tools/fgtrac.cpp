// fgtrac: run the instrumented demo pipeline, audit subjects, verify the
// ledger and produce tampered copies of a run for negative testing.
//
// Exit codes: 0 success / report released, 1 error or broken ledger,
// 2 tampering detected, 3 authorization denied, 4 unknown subject.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fgtrac/audit.hpp"
#include "fgtrac/error.hpp"
#include "fgtrac/run.hpp"

namespace fs = std::filesystem;
using namespace fgtrac;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitTampering = 2;
constexpr int kExitDenied = 3;
constexpr int kExitUnknownSubject = 4;

std::optional<std::string> secret_from_env() {
  const char* s = std::getenv("FGTRAC_SECRET");
  if (s == nullptr || *s == '\0') return std::nullopt;
  return std::string(s);
}

std::string require_secret() {
  auto s = secret_from_env();
  if (!s) throw Error(ErrorCode::EmptySecret, "set FGTRAC_SECRET to the deployment token secret");
  return *s;
}

int report_tampering(const audit::TamperingDetected& t) {
  std::cerr << "TamperingDetected: batch " << t.batch_id;
  if (t.seq) std::cerr << " event " << *t.seq;
  std::cerr << ": " << t.reason << "; the trace may have been tampered with, no logs released\n";
  return kExitTampering;
}

int cmd_demo_run(const std::string& config_path, const std::optional<std::string>& out) {
  auto config = config_path.empty() ? run::RunConfig::defaults() : run::RunConfig::load(config_path);
  const fs::path root = out ? fs::path(*out) : fs::path(config.output_dir);
  auto art = run::demo_run(config, root);
  std::cout << "run_id " << art.run_id << "\n";
  std::cout << "dir " << art.dir.string() << "\n";
  std::cout << "selected_checkpoints";
  for (int e : art.training.selected) std::cout << " " << e;
  std::cout << "\n";
  const auto secret = secret_from_env();
  for (const auto& s : art.roster) {
    std::cout << s.subject.hex() << " " << trace::to_string(s.role);
    if (secret) std::cout << " " << issue_token(*secret, s.subject).token.hex();
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_audit(const std::string& dir, const std::string& subject_hex, const std::string& token_hex,
              const std::string& format) {
  const auto subject = PseudonymousId::from_hex(subject_hex);
  const AccessToken token{Digest::from_hex(token_hex), subject};
  const auto view = run::RunView::open(dir);
  const auto outcome = audit::audit(subject, token, require_secret(), view.store(), view.ledger());
  if (const auto* r = std::get_if<audit::AuditReport>(&outcome)) {
    std::cout << audit::render_report(*r, format == "json" ? audit::ReportFormat::Json : audit::ReportFormat::Text);
    if (format == "json") std::cout << "\n";
    return kExitOk;
  }
  if (const auto* t = std::get_if<audit::TamperingDetected>(&outcome)) return report_tampering(*t);
  if (std::holds_alternative<audit::AuthorizationDenied>(outcome)) {
    std::cerr << "AuthorizationDenied\n";
    return kExitDenied;
  }
  std::cerr << "UnknownSubject\n";
  return kExitUnknownSubject;
}

int cmd_verify_ledger(const std::string& path) {
  const fs::path p(path);
  if (fs::is_directory(p)) {
    const auto view = run::RunView::open(p);
    auto chain = ledger::verify_chain(view.ledger());
    if (!chain.ok()) {
      std::cout << "BrokenAt " << *chain.broken_at << "\n";
      return kExitError;
    }
    audit::Auditor auditor(view.store(), view.ledger(), "");
    if (const auto& bad = auditor.integrity()) {
      std::cout << "BatchMismatch " << bad->batch_id << ": " << bad->reason << "\n";
      return kExitError;
    }
    std::cout << "OK " << view.ledger().size() << " blocks, " << view.store().seals().size()
              << " committed batches match their roots\n";
    return kExitOk;
  }
  const auto chain = ledger::Ledger::open(p);
  auto status = ledger::verify_chain(chain);
  if (!status.ok()) {
    std::cout << "BrokenAt " << *status.broken_at << "\n";
    return kExitError;
  }
  std::cout << "OK " << chain.size() << " blocks\n";
  return kExitOk;
}

int cmd_tamper(const std::string& dir, std::optional<std::uint64_t> event, std::optional<std::uint64_t> block,
               const std::string& mode, const std::string& out, std::optional<std::size_t> byte, unsigned bit) {
  if (event.has_value() == block.has_value()) throw Error(ErrorCode::InvalidConfig, "give exactly one of --event/--block");
  run::TamperSpec spec;
  spec.target = event ? run::TamperTarget::Event : run::TamperTarget::Block;
  spec.index = event ? *event : *block;
  spec.mode = run::tamper_mode_from_string(mode);
  spec.byte = byte;
  spec.bit = bit;
  auto result = run::tamper(dir, out, spec);
  std::cout << result.description << " (" << result.file.string() << ")\n";
  return kExitOk;
}

int cmd_export_report(const std::string& dir, const std::string& out, const std::optional<std::string>& subject_hex,
                      const std::string& format) {
  const auto secret = require_secret();
  const auto view = run::RunView::open(dir);
  audit::Auditor auditor(view.store(), view.ledger(), secret);
  if (const auto& bad = auditor.integrity()) return report_tampering(*bad);

  std::vector<PseudonymousId> subjects;
  if (subject_hex) {
    subjects.push_back(PseudonymousId::from_hex(*subject_hex));
  } else {
    std::ifstream in(fs::path(dir) / "subjects.json");
    const auto roster = nlohmann::json::parse(in);
    for (const auto& s : roster.at("subjects")) subjects.push_back(PseudonymousId::from_hex(s.at("subject").get<std::string>()));
  }

  fs::create_directories(out);
  const bool json_out = format == "json";
  nlohmann::json index = nlohmann::json::array();
  for (const auto& subject : subjects) {
    const auto outcome = auditor.audit(subject, issue_token(secret, subject));
    if (const auto* t = std::get_if<audit::TamperingDetected>(&outcome)) return report_tampering(*t);
    if (std::holds_alternative<audit::UnknownSubject>(outcome)) {
      std::cerr << "UnknownSubject " << subject.hex() << "\n";
      return kExitUnknownSubject;
    }
    const auto& report = std::get<audit::AuditReport>(outcome);
    const auto file = fs::path(out) / (subject.hex() + (json_out ? ".json" : ".txt"));
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    f << audit::render_report(report, json_out ? audit::ReportFormat::Json : audit::ReportFormat::Text);
    index.push_back({{"subject", subject.hex()}, {"events", report.events.size()}, {"file", file.filename().string()}});
  }
  std::ofstream(fs::path(out) / "index.json") << nlohmann::json{{"run_id", view.run_id()}, {"reports", index}}.dump(2) << "\n";
  std::cout << "exported " << subjects.size() << " verified reports to " << out << "\n";
  return kExitOk;
}

int cmd_verify_report(const std::string& report_file, const std::string& ledger_path) {
  std::ifstream in(report_file, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read " + report_file);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto report = audit::parse_report(text);
  fs::path lp(ledger_path);
  if (fs::is_directory(lp)) lp = ledger::ledger_path(lp, run::discover_run_id(lp));
  const auto chain = ledger::Ledger::open(lp);
  if (!audit::verify_report_offline(report, chain)) {
    std::cout << "FAILED: report does not verify against " << lp.string() << "\n";
    return kExitTampering;
  }
  std::cout << "OK " << report.events.size() << " events verified against " << lp.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample-level traceability: instrumented training, Merkle-anchored logs, verifiable audits"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_root;
  auto* demo = app.add_subcommand("demo-run", "Run the instrumented desk-scale pipeline");
  demo->add_option("--config", config_path, "Run config JSON (defaults used when omitted)");
  demo->add_option("--out", out_root, "Directory that receives runs/<run_id>/");

  std::string run_dir, subject, token, format = "text";
  auto* aud = app.add_subcommand("audit", "Verify and release one subject's trace");
  aud->add_option("--run", run_dir, "Run directory")->required();
  aud->add_option("--subject", subject, "Pseudonymous id (64 hex)")->required();
  aud->add_option("--token", token, "Access token (64 hex)")->required();
  aud->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

  std::string ledger_target;
  auto* vl = app.add_subcommand("verify-ledger", "Verify the hash chain (and batch roots, given a run dir)");
  vl->add_option("path", ledger_target, "Ledger file or run directory")->required();

  std::string tamper_src, tamper_out, mode = "flip-bit";
  std::optional<std::uint64_t> event, block;
  std::optional<std::size_t> byte;
  unsigned bit = 0;
  auto* tam = app.add_subcommand("tamper", "Copy a run and apply one mutation to the copy");
  tam->add_option("run", tamper_src, "Run directory")->required();
  tam->add_option("--event", event, "Event seq to mutate");
  tam->add_option("--block", block, "Block index to mutate");
  tam->add_option("--mode", mode, "flip-bit, delete-line or reorder")
      ->check(CLI::IsMember({"flip-bit", "delete-line", "reorder"}));
  tam->add_option("--byte", byte, "Byte offset within the line for flip-bit (default: middle)");
  tam->add_option("--bit", bit, "Bit 0-7 for flip-bit")->check(CLI::Range(0, 7));
  tam->add_option("--out", tamper_out, "Destination directory for the mutated copy")->required();

  std::string export_run, export_out, export_format = "json";
  std::optional<std::string> export_subject;
  auto* exp = app.add_subcommand("export-report", "Write verified reports for one or all subjects");
  exp->add_option("--run", export_run, "Run directory")->required();
  exp->add_option("--out", export_out, "Output directory")->required();
  exp->add_option("--subject", export_subject, "Only this subject (64 hex)");
  exp->add_option("--format", export_format, "text or json")->check(CLI::IsMember({"text", "json"}));

  std::string token_subject;
  auto* tok = app.add_subcommand("issue-token", "Print the access token for a subject (needs FGTRAC_SECRET)");
  tok->add_option("--subject", token_subject, "Pseudonymous id (64 hex)")->required();

  std::string report_file, report_ledger;
  auto* vr = app.add_subcommand("verify-report", "Re-verify an exported JSON report using only the ledger");
  vr->add_option("--report", report_file, "Report JSON")->required();
  vr->add_option("--ledger", report_ledger, "Ledger file or run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*demo) return cmd_demo_run(config_path, out_root);
    if (*aud) return cmd_audit(run_dir, subject, token, format);
    if (*vl) return cmd_verify_ledger(ledger_target);
    if (*tam) return cmd_tamper(tamper_src, event, block, mode, tamper_out, byte, bit);
    if (*exp) return cmd_export_report(export_run, export_out, export_subject, export_format);
    if (*tok) {
      std::cout << issue_token(require_secret(), PseudonymousId::from_hex(token_subject)).token.hex() << "\n";
      return kExitOk;
    }
    if (*vr) return cmd_verify_report(report_file, report_ledger);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
