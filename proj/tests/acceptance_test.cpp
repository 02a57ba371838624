// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <string>

#include "fgtrac/audit.hpp"
#include "fgtrac/error.hpp"
#include "fgtrac/influence.hpp"
#include "fgtrac/run.hpp"
#include "test_support.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fgtrac;
using fgtrac::testing::ScratchDir;
using Clock_ = std::chrono::steady_clock;

constexpr const char* kSecret = "acceptance-secret";

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock_::time_point t0) {
  return std::chrono::duration<double>(Clock_::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<train::Checkpoint> selected_checkpoints(const train::TrainRunResult& r) {
  std::vector<train::Checkpoint> out;
  for (int e : r.selected) out.push_back(r.checkpoints[static_cast<std::size_t>(e)]);
  return out;
}

run::RunConfig default_config() { return run::RunConfig::defaults(); }

Outcome neutrality() {
  const auto t0 = Clock_::now();
  const auto cfg = default_config();
  const auto data = train::make_dataset(cfg.dataset);
  auto store = trace::EventStore::in_memory("neutral", Clock::system());
  auto chain = ledger::Ledger::in_memory(Clock::system());
  const auto roles_hooked = train::split(data, cfg.split, cfg.training.seed, &store);
  const auto hooked = train::train(data, roles_hooked, cfg.training, &store,
                                   [&](int) { run::anchor_pending(store, chain); });
  const auto roles_bare = train::split(data, cfg.split, cfg.training.seed, nullptr);
  const auto bare = train::train(data, roles_bare, cfg.training, nullptr);
  const double secs = seconds_since(t0);
  const bool same = hooked.final_params == bare.final_params;
  return {same && secs < 10.0, std::string(same ? "final params bit-identical" : "final params differ") + ", " +
                                   std::to_string(store.size()) + " events logged, " + fmt("%.2fs", secs)};
}

struct DemoFixture {
  ScratchDir dir{"acceptance"};
  run::RunArtifacts artifacts;
  double seconds = 0.0;
};

DemoFixture& demo() {
  static const auto f = [] {
    auto d = std::make_unique<DemoFixture>();
    const auto t0 = Clock_::now();
    d->artifacts = run::demo_run(default_config(), d->dir.path());
    d->seconds = seconds_since(t0);
    return d;
  }();
  return *f;
}

Outcome completeness() {
  auto& d = demo();
  const auto t0 = Clock_::now();
  const auto view = run::RunView::open(d.artifacts.dir);
  const audit::Auditor auditor(view.store(), view.ledger(), kSecret);

  std::map<PseudonymousId, std::vector<std::uint64_t>> rescan;
  for (std::uint64_t q = 0; q < view.store().size(); ++q) {
    const auto e = trace::parse_event(view.store().line(q));
    std::set<PseudonymousId> who;
    if (e.subject) who.insert(*e.subject);
    if (const auto* c = std::get_if<trace::SampleContributionPayload>(&e.payload)) {
      who.insert(c->target);
      who.insert(c->candidate);
    }
    if (const auto* a = std::get_if<trace::TrainingActionPayload>(&e.payload)) who.insert(a->members.begin(), a->members.end());
    for (const auto& s : who) rescan[s].push_back(q);
  }

  std::size_t verified = 0, covered = 0, missing = 0;
  for (const auto& entry : d.artifacts.roster) {
    const auto out = auditor.audit(entry.subject, issue_token(kSecret, entry.subject));
    const auto* r = std::get_if<audit::AuditReport>(&out);
    if (r == nullptr || !r->verified || !audit::verify_report_offline(*r, view.ledger())) continue;
    ++verified;
    bool t0e = false, t1 = false, t2 = false, t3 = false;
    std::vector<std::uint64_t> seqs;
    for (const auto& e : r->events) {
      seqs.push_back(e.seq);
      t0e |= e.kind() == trace::EventKind::UserMapping;
      t1 |= e.kind() == trace::EventKind::TrainingRole;
      if (const auto* a = std::get_if<trace::TrainingActionPayload>(&e.payload)) {
        t2 |= a->epoch.has_value() && !a->members.empty();
        t3 |= a->action == "prediction";
      }
    }
    covered += t0e && t1 && t2 && t3;
    const auto& want = rescan[entry.subject];
    for (auto q : want) missing += !std::binary_search(seqs.begin(), seqs.end(), q);
    missing += seqs.size() > want.size() ? seqs.size() - want.size() : 0;
  }
  const double secs = d.seconds + seconds_since(t0);
  const std::size_t n = d.artifacts.roster.size();
  const bool pass = n == 120 && verified == n && covered == n && missing == 0 && secs < 30.0;
  return {pass, std::to_string(verified) + "/" + std::to_string(n) + " verified, " + std::to_string(covered) +
                    " with T0-T3 coverage, " + std::to_string(missing) + " missing events, " + fmt("%.2fs", secs)};
}

Outcome commitment() {
  auto& d = demo();
  const auto view = run::RunView::open(d.artifacts.dir);
  const auto seals = view.store().seals();
  std::size_t match = 0;
  for (const auto& s : seals) {
    std::vector<std::string> leaves;
    for (auto q = s.from_seq; q <= s.to_seq; ++q) leaves.push_back(view.store().line(q));
    const auto block = view.ledger().find_batch(s.batch_id);
    if (block && merkle::build(leaves).root() == view.ledger().blocks()[*block].merkle_root) ++match;
  }
  const bool covers_all = !seals.empty() && seals.back().to_seq + 1 == view.store().size() &&
                          seals.size() + 1 == view.ledger().size();
  return {covers_all && match == seals.size(),
          std::to_string(match) + "/" + std::to_string(seals.size()) + " batch roots match the ledger"};
}

Outcome tamper_detection() {
  auto& d = demo();
  const auto view = run::RunView::open(d.artifacts.dir);
  const std::uint64_t events = view.store().size();
  const std::uint64_t blocks = view.ledger().size();
  std::mt19937_64 rng(20240601);
  ScratchDir scratch("tamper-trials");
  const int trials = 240;
  int detected = 0, released = 0;
  for (int t = 0; t < trials; ++t) {
    run::TamperSpec spec;
    spec.target = t % 2 == 0 ? run::TamperTarget::Event : run::TamperTarget::Block;
    spec.index = spec.target == run::TamperTarget::Event ? rng() % events : rng() % blocks;
    const std::string line = spec.target == run::TamperTarget::Event
                                 ? view.store().line(spec.index)
                                 : ledger::canonical_serialize(view.ledger().blocks()[spec.index]);
    spec.byte = rng() % line.size();
    spec.bit = static_cast<unsigned>(rng() % 8);
    const auto dst = scratch.path() / ("t" + std::to_string(t));
    run::tamper(d.artifacts.dir, dst, spec);

    // subjects affected by the mutation: those of the original event, or
    // every subject whose events sit in the mutated block's batch
    std::set<PseudonymousId> affected;
    std::pair<std::uint64_t, std::uint64_t> range{spec.index, spec.index};
    if (spec.target == run::TamperTarget::Block) {
      const auto& seals = view.store().seals();
      range = spec.index == 0 ? std::pair<std::uint64_t, std::uint64_t>{seals[0].from_seq, seals[0].to_seq}
                              : std::pair<std::uint64_t, std::uint64_t>{seals[spec.index - 1].from_seq,
                                                                        seals[spec.index - 1].to_seq};
    }
    for (auto q = range.first; q <= range.second; ++q) {
      for (const auto& s : trace::involved_subjects(*view.store().event(q))) affected.insert(s);
    }
    if (affected.empty()) affected.insert(d.artifacts.roster[rng() % d.artifacts.roster.size()].subject);

    bool any_released = false;
    try {
      const auto bad = run::RunView::open(dst);
      const audit::Auditor auditor(bad.store(), bad.ledger(), kSecret);
      for (const auto& s : affected) {
        const auto out = auditor.audit(s, issue_token(kSecret, s));
        if (std::holds_alternative<audit::AuditReport>(out)) any_released = true;
      }
    } catch (const std::exception&) {
      // an unreadable run releases nothing
    }
    detected += !any_released;
    released += any_released;
    fs::remove_all(dst);
  }
  return {trials >= 200 && detected == trials,
          std::to_string(detected) + "/" + std::to_string(trials) + " single-bit mutations refused, " +
              std::to_string(released) + " reports released from mutated runs"};
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t classes = 2 + rng() % 4;
    const std::size_t dim = 2 + rng() % 4;
    const auto p = fgtrac::testing::random_params(rng, classes, dim);
    const auto s = fgtrac::testing::random_sample(rng, classes, dim);
    worst = std::max(worst, fgtrac::testing::relative_error(influence::grad_loss(p, s).values,
                                                           fgtrac::testing::finite_difference_gradient(p, s)));
  }
  return {worst < 1e-6, "worst relative error over 100 draws " + fmt("%.3g", worst)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = fgtrac::testing::random_params(rng, 2, 2);
    const std::vector<train::Checkpoint> c{{"epoch-1", 1, p}};
    const auto a = fgtrac::testing::random_sample(rng, 2, 2, "a");
    const auto b = fgtrac::testing::random_sample(rng, 2, 2, "b");
    const auto ga = fgtrac::testing::finite_difference_gradient(p, a);
    const auto gb = fgtrac::testing::finite_difference_gradient(p, b);
    double brute = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) brute += ga[i] * gb[i];
    const double got = influence::influence_cp(a, b, c);
    worst = std::max(worst, std::abs(got - brute) / std::max(std::abs(brute), 1e-12));
  }
  return {worst < 1e-5, "worst relative error over 50 instances " + fmt("%.3g", worst)};
}

Outcome influence_algebra() {
  std::mt19937_64 rng(7);
  int sym = 0, self = 0, dup = 0, add = 0;
  const int pairs = 1000;
  for (int t = 0; t < pairs; ++t) {
    const std::size_t classes = 2 + rng() % 3;
    const std::size_t dim = 2 + rng() % 3;
    std::vector<train::Checkpoint> ckpts;
    for (std::size_t i = 0, n = 2 + rng() % 3; i < n; ++i) {
      ckpts.push_back({"epoch-" + std::to_string(i + 1), static_cast<int>(i + 1),
                       fgtrac::testing::random_params(rng, classes, dim)});
    }
    const auto a = fgtrac::testing::random_sample(rng, classes, dim, "a");
    const auto b = fgtrac::testing::random_sample(rng, classes, dim, "b");
    const train::Sample a_dup = a;
    std::span<const train::Checkpoint> all(ckpts);
    const double ab = influence::influence_cp(a, b, all);
    const double aa = influence::influence_cp(a, a, all);
    sym += ab == influence::influence_cp(b, a, all);
    self += aa >= 0.0;
    dup += influence::influence_cp(a, a_dup, all) == aa;
    add += ab == influence::influence_cp(a, b, all.first(all.size() - 1)) + influence::influence_cp(a, b, all.last(1));
  }
  const bool pass = sym == pairs && self == pairs && dup == pairs && add == pairs;
  return {pass, "symmetry " + std::to_string(sym) + ", self>=0 " + std::to_string(self) + ", duplicate " +
                    std::to_string(dup) + ", additivity " + std::to_string(add) + " of " + std::to_string(pairs)};
}

Outcome semantic_polarity() {
  const auto cfg = default_config();
  const auto data = train::make_dataset(cfg.dataset);
  const auto roles = train::split(data, cfg.split, cfg.training.seed, nullptr);
  const auto result = train::train(data, roles, cfg.training, nullptr);
  const auto ckpts = selected_checkpoints(result);
  if (ckpts.empty()) return {false, "no checkpoints selected"};
  std::vector<std::size_t> targets(roles.test.begin(), roles.test.end());
  targets.insert(targets.end(), roles.validation.begin(), roles.validation.end());
  targets.resize(20);
  int ok = 0;
  double worst_margin = INFINITY;
  for (auto t : targets) {
    double within = 0.0, cross = 0.0;
    int nw = 0, nc = 0;
    for (auto i : roles.train) {
      const double s = influence::influence_cp(data.samples[t], data.samples[i], ckpts);
      if (data.samples[i].label == data.samples[t].label) {
        within += s;
        ++nw;
      } else {
        cross += s;
        ++nc;
      }
    }
    const double margin = within / nw - cross / nc;
    worst_margin = std::min(worst_margin, margin);
    ok += margin > 0.0;
  }
  return {ok == 20, std::to_string(ok) + "/20 targets with within-class mean above cross-class mean (smallest gap " +
                        fmt("%.3g", worst_margin) + ")"};
}

Outcome checkpoint_selection() {
  const std::vector<double> losses{2.303, 1.9, 1.5, 1.45, 0.9, 0.88};
  const auto got = train::select_checkpoints(losses, 3, 10);
  const bool example = got == std::vector<int>{1, 2, 4};
  const bool defaults = train::TrainConfig{}.num_checkpoints == 3 && default_config().training.num_checkpoints == 3;
  std::string s = "selected {";
  for (std::size_t i = 0; i < got.size(); ++i) s += (i ? ", " : "") + std::to_string(got[i]);
  return {example && defaults, s + "}, default |C| = " + std::to_string(train::TrainConfig{}.num_checkpoints)};
}

double time_profile(const train::Sample& target, std::span<const train::Sample> candidates,
                    std::span<const train::Checkpoint> ckpts) {
  double best = INFINITY;
  for (int rep = 0; rep < 7; ++rep) {
    auto store = trace::EventStore::in_memory("timing", Clock::fixed());
    influence::GradientCache cache;
    const auto t0 = Clock_::now();
    influence::influence_profile(target, candidates, ckpts, &store, cache);
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

Outcome cost_contracts() {
  // on-chain block size for batches of 1 and 10,000 events
  auto chain = ledger::Ledger::in_memory(Clock::fixed());
  auto store = trace::EventStore::in_memory("cost", Clock::fixed());
  store.record_user_mapping("subj-0");
  auto one = store.seal_pending();
  const auto size_one = ledger::canonical_serialize(chain.commit(merkle::build(one->leaves).root(), one->record.batch_id)).size();
  for (int i = 1; i <= 10000; ++i) store.record_user_mapping("subj-" + std::to_string(i));
  auto many = store.seal_pending();
  const auto size_many =
      ledger::canonical_serialize(chain.commit(merkle::build(many->leaves).root(), many->record.batch_id)).size();
  const bool constant = size_one == size_many && many->leaves.size() == 10000;

  // proof length bound
  bool proofs_ok = true;
  for (std::size_t m : {1u, 2u, 3u, 5u, 8u, 100u, 1000u, 10000u}) {
    std::vector<std::string> leaves(many->leaves.begin(), many->leaves.begin() + static_cast<std::ptrdiff_t>(m));
    const auto tree = merkle::build(leaves);
    const auto bound = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(m))));
    for (std::size_t i = 0; i < m; i += std::max<std::size_t>(1, m / 64)) {
      const auto p = merkle::prove(tree, i);
      proofs_ok &= p.path.size() <= bound && merkle::verify(leaves[i], p, tree.root());
    }
  }

  // caching bound: N vs 2N candidates
  std::mt19937_64 rng(10);
  std::vector<train::Checkpoint> ckpts;
  for (int i = 0; i < 3; ++i) ckpts.push_back({"epoch-" + std::to_string(i + 1), i + 1, fgtrac::testing::random_params(rng, 3, 4)});
  const std::size_t n = 4000;
  std::vector<train::Sample> pool;
  for (std::size_t i = 0; i < 2 * n; ++i) pool.push_back(fgtrac::testing::random_sample(rng, 3, 4, "c-" + std::to_string(i)));
  const auto target = fgtrac::testing::random_sample(rng, 3, 4, "target");
  const double t_n = time_profile(target, std::span<const train::Sample>(pool).first(n), ckpts);
  const double t_2n = time_profile(target, pool, ckpts);
  const double ratio = t_2n / t_n;

  return {constant && proofs_ok && ratio <= 2.5,
          "block bytes " + std::to_string(size_one) + " vs " + std::to_string(size_many) + ", proof bound " +
              (proofs_ok ? "held" : "violated") + ", influence time 2N/N = " + fmt("%.2f", ratio)};
}

Outcome baseline_loss() {
  double worst = 0.0;
  for (std::size_t k : {2u, 3u, 10u}) {
    train::DatasetConfig dc;
    dc.classes = k;
    dc.n_per_class = 20;
    const auto data = train::make_dataset(dc);
    const auto roles = train::split(data, {0.6, 0.2, 0.2}, 7, nullptr);
    const double loss = train::mean_loss(train::ModelParams::zeros(k, data.dim), data, roles.validation);
    worst = std::max(worst, std::abs(loss - std::log(static_cast<double>(k))));
  }
  return {worst < 1e-12, "max |val loss - ln K| over K in {2, 3, 10} = " + fmt("%.3g", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"instrumentation neutrality", neutrality},
      {"trace completeness", completeness},
      {"commitment consistency", commitment},
      {"tamper detection", tamper_detection},
      {"gradient correctness", gradient_correctness},
      {"influence oracle equivalence", oracle_equivalence},
      {"influence algebra", influence_algebra},
      {"semantic polarity", semantic_polarity},
      {"checkpoint selection", checkpoint_selection},
      {"cost contracts", cost_contracts},
      {"baseline loss anchor", baseline_loss},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
