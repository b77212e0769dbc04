#include "misscrit/simulate.hpp"

#include <atomic>
#include <functional>
#include <exception>
#include <mutex>
#include <thread>

namespace misscrit {

void StudyConfig::validate() const {
  truth.validate();
  if (candidates.empty()) throw std::invalid_argument("study needs at least one candidate");
  if (reference >= candidates.size()) throw std::invalid_argument("reference candidate out of range");
  int max_d = 0;
  for (const auto& c : candidates) {
    if (c.k() != truth.k()) {
      throw std::invalid_argument("candidate " + c.label() + " has a different component count than the truth");
    }
    max_d = std::max(max_d, c.free_dim());
  }
  if (n < max_d) throw std::invalid_argument("study n must be at least the largest d");
  if (n_tilde < n) throw std::invalid_argument("study n_tilde must be at least n");
  if (b < 2) throw std::invalid_argument("study needs b >= 2 replicates");
  EmConfig e = em;
  if (e.init == InitMethod::TrueAnchored && !e.anchor) e.anchor = truth;
  e.validate();
}

namespace {

Params sim1_truth() {
  const MixtureSpec full = MixtureSpec::untied(2, "truth");
  return make_params<double>(full, Vector{{0.6, 0.4}}, Vector{{-1.0, 1.0}}, Vector{{0.49, 0.49}});
}

Params sim2_truth() {
  const MixtureSpec full = MixtureSpec::untied(3, "truth");
  return make_params<double>(full, Vector{{0.5, 0.3, 0.2}}, Vector{{-2.0, 0.0, 3.0}}, Vector{{0.49, 0.49, 1.0}});
}

std::vector<MixtureSpec> sim1_candidates() {
  return {MixtureSpec::fully_tied(2, "model1"), MixtureSpec::untied(2, "model2")};
}

std::vector<MixtureSpec> sim2_candidates() {
  return {
      MixtureSpec(3, {{0, 1, 2}}, "model1"),
      MixtureSpec(3, {{0}, {1, 2}}, "model2"),
      MixtureSpec(3, {{0, 2}, {1}}, "model3"),
      MixtureSpec(3, {{0, 1}, {2}}, "model4"),
      MixtureSpec(3, {{0}, {1}, {2}}, "model5"),
  };
}

StudyConfig make_study(std::string name, Params truth, std::vector<MixtureSpec> candidates, std::size_t reference,
                       Eigen::Index n, int b, Eigen::Index n_tilde, std::uint64_t seed) {
  StudyConfig cfg;
  cfg.name = std::move(name);
  cfg.truth = std::move(truth);
  cfg.candidates = std::move(candidates);
  cfg.reference = reference;
  cfg.n = n;
  cfg.n_tilde = n_tilde;
  cfg.b = b;
  cfg.master_seed = seed;
  cfg.em.init = InitMethod::TrueAnchored;
  cfg.em.anchor = cfg.truth;
  // Some misspecified three-component fits contract at rates near 1; a
  // 2000-step cap would drop a few percent of replicates.
  cfg.em.max_iters = 20000;
  return cfg;
}

}  // namespace

// sim1 deltas are model2 - model1, so model1 is the reference and
// E(dAIC) sits near +1: model2 adds one redundant variance.
StudyConfig builtin_sim1(Eigen::Index n, int b, Eigen::Index n_tilde, std::uint64_t master_seed) {
  return make_study("sim1", sim1_truth(), sim1_candidates(), 0, n, b, n_tilde, master_seed);
}

StudyConfig builtin_sim2(Eigen::Index n, int b, Eigen::Index n_tilde, std::uint64_t master_seed) {
  return make_study("sim2", sim2_truth(), sim2_candidates(), 3, n, b, n_tilde, master_seed);
}

StudyConfig builtin_study(const std::string& name) {
  if (name == "sim1") return builtin_sim1();
  if (name == "sim2") return builtin_sim2();
  throw std::invalid_argument("unknown builtin study '" + name + "' (expected sim1 or sim2)");
}

BuiltinSpec builtin_spec(const std::string& selector) {
  const auto colon = selector.find(':');
  if (colon != std::string::npos) {
    const std::string study = selector.substr(0, colon);
    const std::string model = selector.substr(colon + 1);
    std::vector<MixtureSpec> cands;
    Params truth;
    if (study == "sim1") {
      cands = sim1_candidates();
      truth = sim1_truth();
    } else if (study == "sim2") {
      cands = sim2_candidates();
      truth = sim2_truth();
    }
    for (auto& c : cands) {
      if (c.label() == model) {
        return {MixtureSpec(c.k(), c.variance_classes(), selector), truth};
      }
    }
  }
  throw std::invalid_argument("unknown builtin spec '" + selector + "'");
}

std::vector<std::string> builtin_spec_names() {
  return {"sim1:model1", "sim1:model2", "sim2:model1", "sim2:model2",
          "sim2:model3", "sim2:model4", "sim2:model5"};
}

double loss_yy(const Params& theta, const IncompleteDataset& holdout) {
  return -log_likelihood(holdout, theta) / static_cast<double>(holdout.size());
}

double loss_xy(const Params& theta, const CompleteDataset& holdout) {
  holdout.validate(theta.k());
  double acc = 0.0;
  for (Eigen::Index t = 0; t < holdout.size(); ++t) acc += log_px(holdout.y[t], holdout.z[t], theta);
  return -acc / static_cast<double>(holdout.size());
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t replicate, SeedRole role) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(master_seed);
  h = mix(h ^ replicate);
  h = mix(h ^ static_cast<std::uint64_t>(role));
  return h;
}

std::string to_string(FitStatus s) {
  switch (s) {
    case FitStatus::Ok: return "ok";
    case FitStatus::Degenerate: return "degenerate";
    case FitStatus::NotConverged: return "not-converged";
    case FitStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

MeanSe mean_se(std::span<const double> values) {
  MeanSe out;
  out.count = static_cast<int>(values.size());
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / out.count;
  if (out.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (out.count - 1) / out.count);
  }
  return out;
}

ReplicateRecord run_replicate(const StudyConfig& cfg, int index) {
  const auto b = static_cast<std::uint64_t>(index);
  const CompleteDataset train_full = sample(cfg.truth, cfg.n, derive_seed(cfg.master_seed, b, SeedRole::Train));
  const CompleteDataset holdout = sample(cfg.truth, cfg.n_tilde, derive_seed(cfg.master_seed, b, SeedRole::Holdout));
  const IncompleteDataset train = train_full.observed();
  const IncompleteDataset holdout_y = holdout.observed();

  EmConfig em = cfg.em;
  em.seed = derive_seed(cfg.master_seed, b, SeedRole::Em);
  if (em.init == InitMethod::TrueAnchored && !em.anchor) em.anchor = cfg.truth;

  ReplicateRecord rec;
  rec.index = index;
  rec.selected.fill(-1);
  for (const MixtureSpec& spec : cfg.candidates) {
    CandidateRecord c;
    c.report.model_label = spec.label();
    c.report.d = spec.free_dim();
    try {
      const FitResult fit = fit_em(train, spec, em);
      c.iters = fit.iters;
      c.fixed_point_residual = fit.fixed_point_residual;
      c.max_trace_decrease = fit.max_trace_decrease();
      if (!fit.converged) {
        c.status = FitStatus::NotConverged;
      } else {
        const FisherBundle fb = bundle(fit.theta_hat, cfg.penalty_route, &train);
        c.report = compute_criteria(fit, fb, train);
        c.loss_yy = loss_yy(fit.theta_hat, holdout_y);
        c.loss_xy = loss_xy(fit.theta_hat, holdout);
      }
    } catch (const AllRestartsDegenerate&) {
      c.status = FitStatus::Degenerate;
    } catch (const NotPositiveDefinite&) {
      c.status = FitStatus::NumericalFailure;
    } catch (const QuadratureUnreliable&) {
      c.status = FitStatus::NumericalFailure;
    }
    if (c.status != FitStatus::Ok) rec.excluded = true;
    rec.candidates.push_back(std::move(c));
  }
  if (!rec.excluded) {
    std::vector<CriteriaReport> reports;
    for (const auto& c : rec.candidates) reports.push_back(c.report);
    for (std::size_t ci = 0; ci < kAllCriteria.size(); ++ci) {
      rec.selected[ci] = static_cast<int>(select(reports, kAllCriteria[ci]));
    }
  }
  return rec;
}

namespace {

std::vector<const ReplicateRecord*> included(std::span<const ReplicateRecord> reps) {
  std::vector<const ReplicateRecord*> out;
  for (const auto& r : reps) {
    if (!r.excluded) out.push_back(&r);
  }
  return out;
}

double loss_of(const CandidateRecord& c, RiskKind kind) { return kind == RiskKind::YY ? c.loss_yy : c.loss_xy; }

std::vector<double> risk_series(const StudyConfig& cfg, std::span<const ReplicateRecord> reps,
                                const std::function<std::size_t(const ReplicateRecord&)>& pick, RiskKind kind) {
  std::vector<double> out;
  const double two_n = 2.0 * static_cast<double>(cfg.n);
  for (const ReplicateRecord* r : included(reps)) {
    out.push_back(two_n *
                  (loss_of(r->candidates[pick(*r)], kind) - loss_of(r->candidates[cfg.reference], kind)));
  }
  return out;
}

std::size_t criterion_index(Criterion c) {
  for (std::size_t i = 0; i < kAllCriteria.size(); ++i) {
    if (kAllCriteria[i] == c) return i;
  }
  return 0;
}

}  // namespace

std::vector<double> candidate_risk_series(const StudyResult& r, std::size_t candidate, RiskKind kind) {
  return risk_series(r.config, r.replicates, [&](const ReplicateRecord&) { return candidate; }, kind);
}

std::vector<double> selected_risk_series(const StudyResult& r, Criterion c, RiskKind kind) {
  const std::size_t ci = criterion_index(c);
  return risk_series(r.config, r.replicates,
                     [&](const ReplicateRecord& rec) { return static_cast<std::size_t>(rec.selected[ci]); }, kind);
}

std::vector<double> criterion_delta_series(const StudyResult& r, std::size_t candidate, Criterion c) {
  std::vector<double> out;
  for (const ReplicateRecord* rec : included(r.replicates)) {
    out.push_back(rec->candidates[candidate].report.value(c) - rec->candidates[r.config.reference].report.value(c));
  }
  return out;
}

StudyTables aggregate(const StudyConfig& cfg, std::span<const ReplicateRecord> replicates) {
  StudyTables t;
  const auto inc = included(replicates);
  t.effective_b = static_cast<int>(inc.size());
  t.excluded_replicates = static_cast<int>(replicates.size() - inc.size());
  const double two_n = 2.0 * static_cast<double>(cfg.n);

  for (std::size_t k = 0; k < cfg.candidates.size(); ++k) {
    CandidateTable ct;
    ct.label = cfg.candidates[k].label();
    ct.d = cfg.candidates[k].free_dim();
    ct.correctly_specified = satisfies_tying(cfg.truth, cfg.candidates[k]);
    for (const auto& r : replicates) {
      if (r.candidates[k].status != FitStatus::Ok) ++ct.excluded;
    }
    for (std::size_t ci = 0; ci < kAllCriteria.size(); ++ci) {
      std::vector<double> v;
      for (const ReplicateRecord* r : inc) {
        v.push_back(r->candidates[k].report.value(kAllCriteria[ci]) -
                    r->candidates[cfg.reference].report.value(kAllCriteria[ci]));
      }
      ct.delta_criteria[ci] = mean_se(v);
    }
    std::vector<double> yy, xy;
    for (const ReplicateRecord* r : inc) {
      yy.push_back(two_n * (r->candidates[k].loss_yy - r->candidates[cfg.reference].loss_yy));
      xy.push_back(two_n * (r->candidates[k].loss_xy - r->candidates[cfg.reference].loss_xy));
    }
    ct.risk_yy = mean_se(yy);
    ct.risk_xy = mean_se(xy);
    t.candidates.push_back(std::move(ct));
  }

  for (std::size_t ci = 0; ci < kAllCriteria.size(); ++ci) {
    CriterionTable ct;
    ct.criterion = kAllCriteria[ci];
    ct.selection_counts.assign(cfg.candidates.size(), 0);
    std::vector<double> yy, xy;
    for (const ReplicateRecord* r : inc) {
      const auto sel = static_cast<std::size_t>(r->selected[ci]);
      ++ct.selection_counts[sel];
      yy.push_back(two_n * (r->candidates[sel].loss_yy - r->candidates[cfg.reference].loss_yy));
      xy.push_back(two_n * (r->candidates[sel].loss_xy - r->candidates[cfg.reference].loss_xy));
    }
    ct.selected_risk_yy = mean_se(yy);
    ct.selected_risk_xy = mean_se(xy);
    t.criteria.push_back(std::move(ct));
  }
  return t;
}

StudyResult run_study(const StudyConfig& cfg, int threads) {
  cfg.validate();
  if (threads < 1) throw std::invalid_argument("run_study: threads must be >= 1");
  StudyResult result;
  result.config = cfg;
  result.replicates.resize(static_cast<std::size_t>(cfg.b));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int b = next++; b < cfg.b; b = next++) {
      try {
        result.replicates[static_cast<std::size_t>(b)] = run_replicate(cfg, b);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.b;
      }
    }
  };
  const int n_workers = std::min(threads, cfg.b);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  result.tables = aggregate(cfg, result.replicates);
  for (const auto& ct : result.tables.candidates) {
    if (ct.excluded * 10 > cfg.b) {
      throw TooManyDegenerateStudy("candidate " + ct.label + " was unusable in " + std::to_string(ct.excluded) +
                                       " of " + std::to_string(cfg.b) + " replicates",
                                   result);
    }
  }
  return result;
}

}  // namespace misscrit
