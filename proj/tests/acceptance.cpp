// Acceptance suite: runs both Monte Carlo studies at desk scale plus the
// property and oracle checks, printing one PASS/FAIL line per criterion.
//
// Usage: acceptance [--threads N] [--out DIR] [--only N[,N...]]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "misscrit/criteria.hpp"
#include "misscrit/em.hpp"
#include "misscrit/fisher.hpp"
#include "misscrit/lemma.hpp"
#include "misscrit/serialize.hpp"
#include "misscrit/simulate.hpp"

using namespace misscrit;
namespace fs = std::filesystem;

namespace {

struct Check {
  Check(int id_, std::string title_) : id(id_), title(std::move(title_)) {}

  int id;
  std::string title;
  bool pass = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { lines.push_back("     " + what); }
};


template <typename... A>
std::string fmt(const char* pattern, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, a...);
  return buf;
}

double combined(double a, double b) { return std::hypot(a, b); }

std::size_t idx(Criterion c) {
  for (std::size_t i = 0; i < kAllCriteria.size(); ++i) {
    if (kAllCriteria[i] == c) return i;
  }
  return 0;
}

// Paired one-sided test that `other` has a larger selected risk than `best`.
bool smaller_with_95(const StudyResult& r, Criterion best, Criterion other, RiskKind kind,
                     std::string* detail) {
  const auto a = selected_risk_series(r, best, kind);
  const auto b = selected_risk_series(r, other, kind);
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  const MeanSe m = mean_se(d);
  *detail = fmt("%s - %s: mean %.3f, paired SE %.3f, lower 95%% bound %.3f", to_string(other).c_str(),
                to_string(best).c_str(), m.mean, m.se, m.mean - 1.645 * m.se);
  return m.mean - 1.645 * m.se > 0.0;
}

Params random_valid_params(const MixtureSpec& spec, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(2.0, 1.0);
  std::uniform_real_distribution<double> jitter(0.1, 0.9), ulv(std::log(0.1), std::log(4.0));
  const int k = spec.k();
  Vector w(k), m(k), cv(spec.num_classes()), v(k);
  for (int i = 0; i < k; ++i) w[i] = 0.05 + gamma(rng);
  w /= w.sum();
  // One mean per cell of [-4, 4], cells shuffled across components: coincident
  // means under a shared variance make I_y singular to working precision.
  std::vector<int> cell(static_cast<std::size_t>(k));
  std::iota(cell.begin(), cell.end(), 0);
  std::shuffle(cell.begin(), cell.end(), rng);
  for (int i = 0; i < k; ++i) m[i] = -4.0 + 8.0 * (cell[static_cast<std::size_t>(i)] + jitter(rng)) / k;
  for (int c = 0; c < spec.num_classes(); ++c) cv[c] = std::exp(ulv(rng));
  for (int i = 0; i < k; ++i) v[i] = cv[spec.class_of(i)];
  Params theta = make_params(spec, w, m, v);
  theta.validate();
  return theta;
}

// Criteria 3 and 9 scan every usable fit of the studies.
void scan_fits(const StudyResult& r, double* worst_identity, double* worst_decrease, double* worst_residual,
               int* fits, int* unusable) {
  for (const auto& rep : r.replicates) {
    for (const auto& c : rep.candidates) {
      if (c.status != FitStatus::Ok) {
        ++*unusable;
        continue;
      }
      ++*fits;
      const CriteriaReport& q = c.report;
      *worst_identity = std::max(*worst_identity, std::abs((q.pdio - q.aic) - 2.0 * (q.aic_xy - q.aic)));
      *worst_decrease = std::max(*worst_decrease, c.max_trace_decrease);
      *worst_residual = std::max(*worst_residual, c.fixed_point_residual);
    }
  }
}

StudyResult run_and_save(const StudyConfig& cfg, int threads, const fs::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  StudyResult r = run_study(cfg, threads);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_study_outputs(dir, r);
  std::printf("ran %s: n=%ld, B=%d, n_tilde=%ld, seed=%llu, %d threads, %.1f s -> %s\n", cfg.name.c_str(),
              static_cast<long>(cfg.n), cfg.b, static_cast<long>(cfg.n_tilde),
              static_cast<unsigned long long>(cfg.master_seed), threads, secs, dir.c_str());
  std::fflush(stdout);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  fs::path out = "acceptance_out";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) threads = std::max(1, std::atoi(argv[++i]));
    else if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc) out = argv[++i];
    else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    }
  }
  auto want = [&](int id) { return only.empty() || only.count(id) > 0; };
  const bool need_studies = want(1) || want(2) || want(3) || want(4) || want(5) || want(9) || want(10);

  std::vector<Check> results;

  // --- studies -------------------------------------------------------------
  const StudyConfig sim1_cfg = builtin_sim1();
  const StudyConfig sim2_cfg = builtin_sim2();
  StudyResult sim1, sim2;
  if (need_studies) {
    sim1 = run_and_save(sim1_cfg, threads, out / "sim1");
    sim2 = run_and_save(sim2_cfg, threads, out / "sim2");
  }

  // model2 minus model1
  const CandidateTable alt = need_studies ? sim1.tables.candidates[1] : CandidateTable{};
  const MeanSe d_aic = alt.delta_criteria[idx(Criterion::Aic)];
  const MeanSe d_pdio = alt.delta_criteria[idx(Criterion::Pdio)];
  const MeanSe d_cd = alt.delta_criteria[idx(Criterion::AicCd)];
  const MeanSe d_xy = alt.delta_criteria[idx(Criterion::AicXy)];

  if (want(1)) {
    Check c{1, "sim1 criterion and risk differences at n=1000 (B=500, n_tilde=5000)"};
    auto within = [&](const char* name, const MeanSe& m, double target, double band_se) {
      const double z = std::abs(m.mean - target) / band_se;
      c.check(z <= 3.0, fmt("%-14s %8.3f (SE %.3f) vs %6.3f: |diff| = %.2f band SE", name, m.mean, m.se, target, z));
    };
    c.note(fmt("effective B = %d, excluded replicates = %d", sim1.tables.effective_b, sim1.tables.excluded_replicates));
    within("E(dAIC)", d_aic, 0.978, d_aic.se);
    within("E(dPDIO)", d_pdio, 36.0, d_pdio.se);
    within("E(dAIC_cd)", d_cd, 36.6, d_cd.se);
    within("E(dAIC_xy)", d_xy, 18.5, d_xy.se);
    within("2n d risk_yy", alt.risk_yy, 1.08, combined(alt.risk_yy.se, 0.027));
    within("2n d risk_xy", alt.risk_xy, 18.6, combined(alt.risk_xy.se, 0.487));
    results.push_back(c);
  }

  if (want(2)) {
    Check c{2, "AIC_xy unbiased for the complete-data risk; PDIO biased"};
    const double se_xy = combined(d_xy.se, alt.risk_xy.se);
    const double gap_xy = std::abs(d_xy.mean - alt.risk_xy.mean);
    c.check(gap_xy <= 3.0 * se_xy, fmt("|E(dAIC_xy) - 2n d risk_xy| = %.3f <= 3 x %.3f", gap_xy, se_xy));
    const double se_pdio = combined(d_pdio.se, alt.risk_xy.se);
    const double gap_pdio = std::abs(d_pdio.mean - alt.risk_xy.mean);
    c.check(gap_pdio >= 10.0 * se_pdio, fmt("|E(dPDIO) - 2n d risk_xy| = %.3f >= 10 x %.3f", gap_pdio, se_pdio));
    results.push_back(c);
  }

  double worst_identity = 0.0, worst_decrease = 0.0, worst_residual = 0.0;
  int fits = 0, unusable = 0;
  scan_fits(sim1, &worst_identity, &worst_decrease, &worst_residual, &fits, &unusable);
  scan_fits(sim2, &worst_identity, &worst_decrease, &worst_residual, &fits, &unusable);

  if (want(3)) {
    Check c{3, "Half-penalty identity PDIO - AIC = 2 (AIC_xy - AIC)"};
    c.check(worst_identity <= 1e-9, fmt("max residual %.3e over %d fits (tolerance 1e-9)", worst_identity, fits));
    results.push_back(c);
  }

  if (want(4)) {
    Check c{4, "sim2 selection frequencies (n=500, B=1000)"};
    c.note(fmt("effective B = %d, excluded replicates = %d", sim2.tables.effective_b, sim2.tables.excluded_replicates));
    const Criterion four[] = {Criterion::Aic, Criterion::Pdio,
                                        Criterion::AicCd, Criterion::AicXy};
    const std::size_t model4 = 3;
    for (auto cr : four) {
      const auto& counts = sim2.tables.criteria[idx(cr)].selection_counts;
      const auto mode = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      c.check(mode == model4, fmt("%-7s counts %4d %4d %4d %4d %4d; modal model%zu", to_string(cr).c_str(), counts[0],
                                  counts[1], counts[2], counts[3], counts[4], mode + 1));
    }
    const auto& aic = sim2.tables.criteria[idx(Criterion::Aic)].selection_counts;
    const auto& pdio = sim2.tables.criteria[idx(Criterion::Pdio)].selection_counts;
    c.check(pdio[0] > aic[0], fmt("PDIO model1 count %d > AIC model1 count %d", pdio[0], aic[0]));
    const int aic_complex = aic[1] + aic[4];
    for (auto cr : {Criterion::Pdio, Criterion::AicCd, Criterion::AicXy}) {
      const auto& counts = sim2.tables.criteria[idx(cr)].selection_counts;
      c.check(aic_complex > counts[1] + counts[4], fmt("AIC model2+model5 %d > %s model2+model5 %d", aic_complex,
                                                       to_string(cr).c_str(), counts[1] + counts[4]));
    }
    results.push_back(c);
  }

  if (want(5)) {
    Check c{5, "sim2 selected-model risks: minimum per risk"};
    for (const auto& ct : sim2.tables.criteria) {
      c.note(fmt("%-7s 2n d risk_yy %7.3f (%.3f)   2n d risk_xy %7.3f (%.3f)", to_string(ct.criterion).c_str(),
                 ct.selected_risk_yy.mean, ct.selected_risk_yy.se, ct.selected_risk_xy.mean, ct.selected_risk_xy.se));
    }
    std::string detail;
    for (auto other : {Criterion::Pdio, Criterion::AicCd, Criterion::AicXy}) {
      const bool ok = smaller_with_95(sim2, Criterion::Aic, other, RiskKind::YY, &detail);
      c.check(ok, "risk_yy: " + detail);
    }
    for (auto other : {Criterion::Aic, Criterion::Pdio, Criterion::AicCd}) {
      const bool ok = smaller_with_95(sim2, Criterion::AicXy, other, RiskKind::XY, &detail);
      c.check(ok, "risk_xy: " + detail);
    }
    results.push_back(c);
  }

  if (want(6)) {
    Check c{6, "Fisher-matrix properties over 200 random points per built-in spec"};
    for (const auto& name : builtin_spec_names()) {
      const MixtureSpec spec = builtin_spec(name).spec;
      std::mt19937_64 rng(derive_seed(20180606, static_cast<std::uint64_t>(spec.free_dim() * 10 + spec.num_classes()),
                                      SeedRole::Train) ^ std::hash<std::string>{}(name));
      double worst_psd = 0.0, worst_trace = 1e300, worst_forms = 0.0, worst_diff = 0.0;
      int failures = 0;
      std::string first_error;
      for (int i = 0; i < 200; ++i) {
        const Params theta = random_valid_params(spec, rng);
        try {
          const FisherBundle b = bundle(theta);
          const auto forms = info_incomplete_forms(theta, default_rule(theta));
          const double norm = spectral_norm(b.i_zy);
          if (norm > 0) worst_psd = std::max(worst_psd, -min_eigenvalue(b.i_zy) / norm);
          worst_diff = std::max(worst_diff, (b.i_zy - (b.i_x - b.i_y)).cwiseAbs().maxCoeff());
          worst_trace = std::min(worst_trace, b.penalty_trace - spec.free_dim());
          worst_forms = std::max(worst_forms, (forms.outer_product - forms.neg_hessian).cwiseAbs().maxCoeff() /
                                                  forms.outer_product.cwiseAbs().maxCoeff());
        } catch (const std::exception& e) {
          if (failures++ == 0) first_error = e.what();
        }
      }
      c.check(failures == 0 && worst_psd <= 1e-8 && worst_diff <= 1e-10 && worst_trace >= -1e-6 && worst_forms <= 1e-4,
              fmt("%-12s min eig(I_zy)/norm >= %.1e, |I_zy - (I_x - I_y)| <= %.1e, min tr - d = %.2e, forms gap %.1e, "
                  "errors %d",
                  name.c_str(), -worst_psd, worst_diff, worst_trace, worst_forms, failures));
      if (failures > 0) c.note("first error: " + first_error);
    }
    results.push_back(c);
  }

  if (want(7)) {
    Check c{7, "SEM vs direct penalty; quadrature I_y vs 10^7-draw Monte Carlo"};
    const auto m2 = builtin_spec("sim1:model2");
    double worst = 0.0;
    int flagged = 0, done = 0;
    for (int i = 0; i < 20; ++i) {
      const IncompleteDataset data =
          sample(m2.truth, 2000, derive_seed(20180607, static_cast<std::uint64_t>(i), SeedRole::Train)).observed();
      EmConfig cfg;
      cfg.anchor = m2.truth;
      cfg.max_iters = 20000;
      const FitResult fit = fit_em(data, m2.spec, cfg);
      if (!fit.converged || fit.degenerate) continue;
      ++done;
      const SemEstimate sem = sem_penalty(data, fit.theta_hat);
      const double direct =
          trace_product_inv(empirical_Hx(data, fit.theta_hat), empirical_GH(data, fit.theta_hat).h);
      worst = std::max(worst, std::abs(sem.value - direct) / direct);
      if (sem.flagged) ++flagged;
    }
    c.check(done == 20 && worst <= 0.02,
            fmt("%d converged fits; max |SEM - direct| / direct = %.2e (tolerance 0.02)", done, worst));
    c.note(fmt("step-halving flags raised: %d", flagged));

    const Params theta = m2.truth;
    const SymMatrix iy = info_incomplete(theta);
    const Eigen::Index n = 10'000'000;
    const CompleteDataset x = sample(theta, n, 20180608);
    const int d = theta.spec.free_dim();
    SymMatrix sum = SymMatrix::Zero(d, d), sum_sq = SymMatrix::Zero(d, d);
    for (Eigen::Index t = 0; t < n; ++t) {
      const Vector s = score_py(x.y[t], theta);
      const SymMatrix o = s * s.transpose();
      sum += o;
      sum_sq += o.cwiseProduct(o);
    }
    double worst_z = 0.0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double mean = sum(i, j) / static_cast<double>(n);
        const double var = sum_sq(i, j) / static_cast<double>(n) - mean * mean;
        worst_z = std::max(worst_z, std::abs(mean - iy(i, j)) / std::sqrt(var / static_cast<double>(n)));
      }
    }
    c.check(worst_z <= 4.0, fmt("max |MC - quadrature| over entries = %.2f Monte Carlo SE (tolerance 4)", worst_z));
    results.push_back(c);
  }

  if (want(8)) {
    Check c{8, "Divergence decomposition on discrete joints"};
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      const auto g = random_joint(3, 3, derive_seed(20180609, i, SeedRole::Train));
      const auto fj = random_joint(3, 3, derive_seed(20180609, i, SeedRole::Holdout));
      const auto h = random_joint(3, 3, derive_seed(20180609, i, SeedRole::Em));
      worst = std::max(worst, lemma1_check(g, fj, h).max_residual());
    }
    c.check(worst <= 1e-12, fmt("100 random pairs: max residual %.2e", worst));
    const auto fj = random_joint(3, 3, 1);
    const auto g = compose(conditional_z_given_y(fj), marginal_y(random_joint(3, 3, 2)));
    const auto col = lemma1_check(g, fj);
    const double collapse = std::max(std::abs(col.d_x - col.d_y), col.max_residual());
    c.check(collapse <= 1e-12, fmt("shared-conditional case: |D_x - D_y| and residuals <= %.2e", collapse));
    results.push_back(c);
  }

  if (want(9)) {
    Check c{9, "EM contract: monotone trace, fixed point, analytic scores"};
    const double tol = sim1_cfg.em.tol_loglik;
    c.check(unusable == 0, fmt("%d usable fits, %d unusable", fits, unusable));
    c.check(worst_decrease <= 1e-9, fmt("largest per-step log-likelihood decrease %.2e (slack 1e-9)", worst_decrease));
    c.check(worst_residual <= 10 * tol, fmt("largest fixed-point residual %.2e (<= %.0e)", worst_residual, 10 * tol));

    const auto names = builtin_spec_names();
    std::mt19937_64 rng(20180610);
    std::normal_distribution<double> ny(0.0, 2.5);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const MixtureSpec spec = builtin_spec(names[static_cast<std::size_t>(i) % names.size()]).spec;
      const Params theta = random_valid_params(spec, rng);
      const double y = ny(rng);
      const Vector at = pack(theta);
      const Vector analytic = score_py(y, theta);
      Vector fd(at.size());
      for (Eigen::Index j = 0; j < at.size(); ++j) {
        const double h = 1e-6 * (1 + std::abs(at[j]));
        Vector up = at, down = at;
        up[j] += h;
        down[j] -= h;
        fd[j] = (log_py(y, unpack(spec, up)) - log_py(y, unpack(spec, down))) / (2 * h);
      }
      worst = std::max(worst, (analytic - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1.0));
    }
    c.check(worst <= 1e-5, fmt("100 points: max relative score gap %.2e (tolerance 1e-5)", worst));
    results.push_back(c);
  }

  if (want(10)) {
    Check c{10, "Determinism across thread counts"};
    const int other = threads == 1 ? 4 : 1;
    const StudyResult again = run_and_save(sim1_cfg, other, out / "sim1_rerun");
    const std::string a = records_csv(sim1), b = records_csv(again);
    c.check(a == b, fmt("records.csv with %d and %d threads: %s (%zu bytes)", threads, other,
                        a == b ? "identical" : "different", a.size()));
    results.push_back(c);
  }

  std::printf("\n");
  int failed = 0;
  for (const auto& c : results) {
    std::printf("%s criterion %d: %s\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str());
    for (const auto& l : c.lines) std::printf("    %s\n", l.c_str());
    if (!c.pass) ++failed;
  }
  std::printf("\n%zu criteria, %d passed, %d failed\n", results.size(), static_cast<int>(results.size()) - failed,
              failed);
  return failed == 0 ? 0 : 1;
}
