#include "fgtrac/tracelog.hpp"

#include <cmath>
#include <cstdio>
#include <initializer_list>

#include "fgtrac/error.hpp"

namespace fgtrac::trace {

using nlohmann::json;

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::UserMapping: return "UserMapping";
    case EventKind::TrainingRole: return "TrainingRole";
    case EventKind::ModalityAttention: return "ModalityAttention";
    case EventKind::SampleContribution: return "SampleContribution";
    case EventKind::TrainingAction: return "TrainingAction";
  }
  return "";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Train: return "train";
    case Role::Validation: return "validation";
    case Role::Test: return "test";
  }
  return "";
}

Role role_from_string(std::string_view text) {
  if (text == "train") return Role::Train;
  if (text == "validation") return Role::Validation;
  if (text == "test") return Role::Test;
  throw Error(ErrorCode::ParseError, "unknown role '" + std::string(text) + "'");
}

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::InvalidEvent, why); }
[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::ParseError, why); }

EventKind kind_from_string(std::string_view text) {
  for (auto k : {EventKind::UserMapping, EventKind::TrainingRole, EventKind::ModalityAttention,
                 EventKind::SampleContribution, EventKind::TrainingAction}) {
    if (to_string(k) == text) return k;
  }
  malformed("unknown event kind '" + std::string(text) + "'");
}

// Strict field access: every key must be known, required ones present, and
// each value of the expected JSON type.
class Fields {
 public:
  Fields(const json& obj, std::initializer_list<std::string_view> allowed) : obj_(obj) {
    if (!obj.is_object()) malformed("expected object");
    for (const auto& [key, _] : obj.items()) {
      bool known = false;
      for (auto a : allowed) known = known || a == key;
      if (!known) malformed("unexpected key '" + key + "'");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json& at(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end()) malformed(std::string("missing key '") + key + "'");
    return *it;
  }

  std::string str(const char* key) const {
    const auto& v = at(key);
    if (!v.is_string()) malformed(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
  }

  std::int64_t integer(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) malformed(std::string("'") + key + "' must be an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_unsigned()) malformed(std::string("'") + key + "' must be unsigned");
    return v.get<std::uint64_t>();
  }

  double real(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_float()) malformed(std::string("'") + key + "' must be a real");
    return v.get<double>();
  }

  PseudonymousId id(const char* key) const {
    auto d = Digest::try_from_hex(str(key));
    if (!d) malformed(std::string("'") + key + "' is not a digest");
    return {*d};
  }

  std::optional<std::int64_t> opt_integer(const char* key) const {
    return has(key) ? std::optional(integer(key)) : std::nullopt;
  }

 private:
  const json& obj_;
};

json payload_to_json(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        json j = json::object();
        if constexpr (std::is_same_v<T, UserMappingPayload>) {
          j["raw_id"] = p.raw_id;
          j["pseudonym"] = p.pseudonym.hex();
        } else if constexpr (std::is_same_v<T, TrainingRolePayload>) {
          j["role"] = to_string(p.role);
        } else if constexpr (std::is_same_v<T, ModalityAttentionPayload>) {
          json weights = json::array();
          for (const auto& w : p.weights) weights.push_back({{"modality", w.modality}, {"weight", w.weight}});
          j["weights"] = std::move(weights);
          j["epoch"] = p.epoch;
          if (p.batch_id) j["batch_id"] = *p.batch_id;
        } else if constexpr (std::is_same_v<T, SampleContributionPayload>) {
          j["target"] = p.target.hex();
          j["candidate"] = p.candidate.hex();
          j["checkpoint_set_id"] = p.checkpoint_set_id;
          j["score"] = p.score;
        } else {
          j["action"] = p.action;
          j["model_version"] = p.model_version;
          if (p.epoch) j["epoch"] = *p.epoch;
          if (p.cost_ms) j["cost_ms"] = *p.cost_ms;
          if (p.batch_index) j["batch_index"] = *p.batch_index;
          if (!p.members.empty()) {
            json members = json::array();
            for (const auto& m : p.members) members.push_back(m.hex());
            j["members"] = std::move(members);
          }
          if (p.predicted_label) j["predicted_label"] = *p.predicted_label;
          if (p.value) j["value"] = *p.value;
        }
        return j;
      },
      payload);
}

Payload payload_from_json(EventKind kind, const json& j) {
  switch (kind) {
    case EventKind::UserMapping: {
      Fields f(j, {"raw_id", "pseudonym"});
      return UserMappingPayload{f.str("raw_id"), f.id("pseudonym")};
    }
    case EventKind::TrainingRole: {
      Fields f(j, {"role"});
      return TrainingRolePayload{role_from_string(f.str("role"))};
    }
    case EventKind::ModalityAttention: {
      Fields f(j, {"weights", "epoch", "batch_id"});
      ModalityAttentionPayload p;
      const auto& weights = f.at("weights");
      if (!weights.is_array()) malformed("'weights' must be an array");
      for (const auto& w : weights) {
        Fields wf(w, {"modality", "weight"});
        p.weights.push_back({wf.str("modality"), wf.real("weight")});
      }
      p.epoch = f.integer("epoch");
      if (f.has("batch_id")) p.batch_id = f.str("batch_id");
      return p;
    }
    case EventKind::SampleContribution: {
      Fields f(j, {"target", "candidate", "checkpoint_set_id", "score"});
      return SampleContributionPayload{f.id("target"), f.id("candidate"), f.str("checkpoint_set_id"),
                                       f.real("score")};
    }
    case EventKind::TrainingAction: {
      Fields f(j, {"action", "model_version", "epoch", "cost_ms", "batch_index", "members",
                   "predicted_label", "value"});
      TrainingActionPayload p;
      p.action = f.str("action");
      p.model_version = f.str("model_version");
      p.epoch = f.opt_integer("epoch");
      p.cost_ms = f.opt_integer("cost_ms");
      p.batch_index = f.opt_integer("batch_index");
      p.predicted_label = f.opt_integer("predicted_label");
      if (f.has("value")) p.value = f.real("value");
      if (f.has("members")) {
        const auto& members = f.at("members");
        if (!members.is_array()) malformed("'members' must be an array");
        for (const auto& m : members) {
          if (!m.is_string()) malformed("member must be a digest string");
          auto d = Digest::try_from_hex(m.get<std::string>());
          if (!d) malformed("member is not a digest");
          p.members.push_back({*d});
        }
      }
      return p;
    }
  }
  malformed("bad kind");
}

}  // namespace

void validate(const TraceEvent& event) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, UserMappingPayload>) {
          if (p.pseudonym != hash_id(p.raw_id)) invalid("pseudonym must equal hash_id(raw_id)");
          if (!event.subject || *event.subject != p.pseudonym) invalid("mapping subject must be its pseudonym");
        } else if constexpr (std::is_same_v<T, TrainingRolePayload>) {
          if (!event.subject) invalid("role event needs a subject");
        } else if constexpr (std::is_same_v<T, ModalityAttentionPayload>) {
          if (p.weights.empty()) invalid("attention weights must be non-empty");
          double sum = 0.0;
          for (const auto& w : p.weights) {
            if (!std::isfinite(w.weight) || w.weight < 0.0 || w.weight > 1.0) {
              invalid("attention weight outside [0,1]");
            }
            if (w.modality.empty()) invalid("modality name must be non-empty");
            sum += w.weight;
          }
          if (std::abs(sum - 1.0) > kWeightSumTolerance) invalid("attention weights must sum to 1");
          if (!event.subject && !p.batch_id) invalid("attention needs a subject or a batch_id");
        } else if constexpr (std::is_same_v<T, SampleContributionPayload>) {
          if (!std::isfinite(p.score)) invalid("contribution score must be finite");
          if (p.checkpoint_set_id.empty()) invalid("checkpoint_set_id must be non-empty");
          if (!event.subject || *event.subject != p.target) invalid("contribution subject must be its target");
        } else {
          if (p.action.empty()) invalid("action must be non-empty");
          if (p.value && !std::isfinite(*p.value)) invalid("action value must be finite");
        }
      },
      event.payload);
}

json to_json(const TraceEvent& event) {
  json j = json::object();
  j["seq"] = event.seq;
  j["timestamp_ms"] = event.timestamp_ms;
  j["run_id"] = event.run_id;
  j["kind"] = to_string(event.kind());
  if (event.subject) j["subject"] = event.subject->hex();
  j["payload"] = payload_to_json(event.payload);
  return j;
}

std::string canonical_serialize(const TraceEvent& event) {
  validate(event);
  try {
    return to_json(event).dump();
  } catch (const json::exception& e) {
    invalid(std::string("not serializable: ") + e.what());  // e.g. invalid UTF-8
  }
}

TraceEvent from_json(const json& j) {
  Fields f(j, {"seq", "timestamp_ms", "run_id", "kind", "subject", "payload"});
  TraceEvent e;
  e.seq = f.unsigned_integer("seq");
  e.timestamp_ms = f.integer("timestamp_ms");
  e.run_id = f.str("run_id");
  if (f.has("subject")) e.subject = f.id("subject");
  e.payload = payload_from_json(kind_from_string(f.str("kind")), f.at("payload"));
  try {
    validate(e);
  } catch (const Error& err) {
    malformed(err.what());
  }
  return e;
}

TraceEvent parse_event(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  return from_json(j);
}

std::vector<PseudonymousId> involved_subjects(const TraceEvent& event) {
  std::vector<PseudonymousId> out;
  auto add = [&](const PseudonymousId& id) {
    for (const auto& o : out) {
      if (o == id) return;
    }
    out.push_back(id);
  };
  if (event.subject) add(*event.subject);
  if (const auto* c = std::get_if<SampleContributionPayload>(&event.payload)) {
    add(c->target);
    add(c->candidate);
  }
  if (const auto* a = std::get_if<TrainingActionPayload>(&event.payload)) {
    for (const auto& m : a->members) add(m);
  }
  return out;
}

std::string batch_id_for(std::string_view run_id, std::uint64_t from_seq, std::uint64_t to_seq) {
  char range[64];
  std::snprintf(range, sizeof range, ":%012llu-%012llu", static_cast<unsigned long long>(from_seq),
                static_cast<unsigned long long>(to_seq));
  return std::string(run_id) + range;
}

}  // namespace fgtrac::trace
