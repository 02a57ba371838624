#include <cstdio>
#include <sstream>

#include "fgtrac/audit.hpp"
#include "fgtrac/error.hpp"

namespace fgtrac::audit {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  return j.at(key).get<T>();
}

json summary_to_json(const influence::ContributionSummary& s) {
  json top = json::array();
  for (const auto& [peer, score] : s.top_positive) top.push_back({{"peer", peer.hex()}, {"score", score}});
  return {{"subject", s.subject.hex()},     {"positive_count", s.positive_count},
          {"negative_count", s.negative_count}, {"records", s.records},
          {"net_score", s.net_score},       {"top_positive", std::move(top)}};
}

influence::ContributionSummary summary_from_json(const json& j) {
  influence::ContributionSummary s;
  s.subject = PseudonymousId::from_hex(j.at("subject").get<std::string>());
  s.positive_count = j.at("positive_count").get<std::size_t>();
  s.negative_count = j.at("negative_count").get<std::size_t>();
  s.records = j.at("records").get<std::size_t>();
  s.net_score = j.at("net_score").get<double>();
  for (const auto& t : j.at("top_positive")) {
    s.top_positive.emplace_back(PseudonymousId::from_hex(t.at("peer").get<std::string>()), t.at("score").get<double>());
  }
  return s;
}

}  // namespace

json to_json(const AuditReport& report) {
  json events = json::array();
  for (const auto& e : report.events) events.push_back(trace::to_json(e));

  json proofs = json::array();
  for (const auto& p : report.proofs) {
    proofs.push_back({{"seq", p.seq}, {"batch_id", p.batch_id}, {"proof", merkle::to_json(p.proof)}});
  }

  const auto& t = report.participation;
  json entries = json::array();
  for (const auto& e : t.entries) entries.push_back({{"seq", e.seq}, {"timestamp_ms", e.timestamp_ms}, {"label", e.label}});
  json participation = {{"role", trace::to_string(t.role)}, {"entries", std::move(entries)}};
  put_opt(participation, "first_used_epoch", t.first_used_epoch);
  put_opt(participation, "last_used_epoch", t.last_used_epoch);
  put_opt(participation, "last_trained_epoch", t.last_trained_epoch);
  put_opt(participation, "predicted_label", t.predicted_label);

  json j = {{"subject", report.subject.hex()},
            {"verified", report.verified},
            {"events", std::move(events)},
            {"proofs", std::move(proofs)},
            {"participation", std::move(participation)}};
  if (report.modality_usage) {
    json weights = json::array();
    for (const auto& w : report.modality_usage->weights) weights.push_back({{"modality", w.modality}, {"weight", w.weight}});
    j["modality_usage"] = {{"epoch", report.modality_usage->epoch},
                           {"records", report.modality_usage->records},
                           {"weights", std::move(weights)}};
  }
  if (report.contribution) j["contribution"] = summary_to_json(*report.contribution);
  return j;
}

AuditReport report_from_json(const json& j) {
  try {
    AuditReport r;
    r.subject = PseudonymousId::from_hex(j.at("subject").get<std::string>());
    r.verified = j.at("verified").get<bool>();
    for (const auto& e : j.at("events")) r.events.push_back(trace::from_json(e));
    for (const auto& p : j.at("proofs")) {
      r.proofs.push_back({p.at("seq").get<std::uint64_t>(), p.at("batch_id").get<std::string>(),
                          merkle::proof_from_json(p.at("proof"))});
    }
    const auto& pj = j.at("participation");
    auto& t = r.participation;
    t.role = trace::role_from_string(pj.at("role").get<std::string>());
    for (const auto& e : pj.at("entries")) {
      t.entries.push_back({e.at("seq").get<std::uint64_t>(), e.at("timestamp_ms").get<std::int64_t>(),
                           e.at("label").get<std::string>()});
    }
    t.first_used_epoch = get_opt<std::int64_t>(pj, "first_used_epoch");
    t.last_used_epoch = get_opt<std::int64_t>(pj, "last_used_epoch");
    t.last_trained_epoch = get_opt<std::int64_t>(pj, "last_trained_epoch");
    t.predicted_label = get_opt<std::int64_t>(pj, "predicted_label");
    if (j.contains("modality_usage")) {
      const auto& mj = j.at("modality_usage");
      ModalityUsage m;
      m.epoch = mj.at("epoch").get<std::int64_t>();
      m.records = mj.at("records").get<std::size_t>();
      for (const auto& w : mj.at("weights")) {
        m.weights.push_back({w.at("modality").get<std::string>(), w.at("weight").get<double>()});
      }
      r.modality_usage = std::move(m);
    }
    if (j.contains("contribution")) r.contribution = summary_from_json(j.at("contribution"));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad report: ") + e.what());
  }
}

AuditReport parse_report(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad report: ") + e.what());
  }
  return report_from_json(j);
}

std::string render_report(const AuditReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) return to_json(report).dump();

  std::ostringstream out;
  out << "Sample audit report\n";
  out << "subject:  " << report.subject.hex() << "\n";
  out << "verified: " << (report.verified ? "yes" : "no") << " (" << report.events.size()
      << " events, each Merkle proof matches its committed root)\n";

  const auto& t = report.participation;
  out << "\n== Participation Timeline ==\n";
  out << "role: " << trace::to_string(t.role) << "\n";
  auto epoch = [](const std::optional<std::int64_t>& e) { return e ? std::to_string(*e) : std::string("-"); };
  out << "first used epoch:   " << epoch(t.first_used_epoch) << "\n";
  out << "last used epoch:    " << epoch(t.last_used_epoch) << "\n";
  out << "last trained epoch: " << epoch(t.last_trained_epoch) << "\n";
  out << "predicted label:    " << epoch(t.predicted_label) << "\n";
  out << "events:\n";
  for (const auto& e : t.entries) {
    out << "  seq " << e.seq << "  t=" << e.timestamp_ms << "  " << e.label << "\n";
  }

  out << "\n== Modality Usage ==\n";
  if (report.modality_usage) {
    const auto& m = *report.modality_usage;
    out << "epoch " << m.epoch << " (" << m.records << " records):";
    std::string ratio;
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
      out << (i ? ", " : " ") << m.weights[i].modality << " " << num(m.weights[i].weight);
      ratio += (i ? ":" : "") + num(m.weights[i].weight);
    }
    out << "\nratio " << ratio << "\n";
  } else {
    out << "none recorded\n";
  }

  out << "\n== Contribution Summary ==\n";
  if (report.contribution) {
    const auto& c = *report.contribution;
    out << "records: " << c.records << "\n";
    out << "positive influence on " << c.positive_count << " peers, negative on " << c.negative_count << "\n";
    out << "net influence score: " << num(c.net_score) << "\n";
    if (!c.top_positive.empty()) {
      out << "top positive:\n";
      for (const auto& [peer, score] : c.top_positive) out << "  " << peer.hex() << "  +" << num(score) << "\n";
    }
  } else {
    out << "none recorded\n";
  }
  return out.str();
}

}  // namespace fgtrac::audit
