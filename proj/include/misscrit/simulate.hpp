#pragma once

// Monte Carlo risk studies: repeated train/holdout draws from a known
// mixture, every candidate fitted by EM, criteria against holdout losses.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "misscrit/criteria.hpp"
#include "misscrit/em.hpp"
#include "misscrit/fisher.hpp"
#include "misscrit/model.hpp"

namespace misscrit {

inline constexpr int kStudySchemaVersion = 1;

struct StudyConfig {
  std::string name;
  Params truth;
  std::vector<MixtureSpec> candidates;
  // Delta quantities are candidate minus this candidate.
  std::size_t reference = 0;
  Eigen::Index n = 1000;
  Eigen::Index n_tilde = 5000;
  int b = 500;
  std::uint64_t master_seed = 1;
  EmConfig em;
  PenaltyRoute penalty_route = PenaltyRoute::Expected;

  void validate() const;
};

// Two-component study: truth (0.6, -1, 1, 0.49, 0.49), candidates with tied
// (d = 4) and free (d = 5) variances.
StudyConfig builtin_sim1(Eigen::Index n = 1000, int b = 500, Eigen::Index n_tilde = 5000,
                         std::uint64_t master_seed = 20180601);
// Three-component study: truth (0.5, 0.3; -2, 0, 3; 0.49, 0.49, 1) and five
// tying patterns with d = 6, 7, 7, 7, 8.
StudyConfig builtin_sim2(Eigen::Index n = 500, int b = 1000, Eigen::Index n_tilde = 2000,
                         std::uint64_t master_seed = 20180602);
StudyConfig builtin_study(const std::string& name);

struct BuiltinSpec {
  MixtureSpec spec;
  Params truth;  // generating point of the study the spec belongs to
};

// "sim1:model1", "sim1:model2", "sim2:model1" .. "sim2:model5"
BuiltinSpec builtin_spec(const std::string& selector);
std::vector<std::string> builtin_spec_names();

// -(1/n~) sum log p_y(y~_t; theta)
double loss_yy(const Params& theta, const IncompleteDataset& holdout);
// -(1/n~) sum log p_x(y~_t, z~_t; theta)
double loss_xy(const Params& theta, const CompleteDataset& holdout);

enum class SeedRole : std::uint64_t { Train = 1, Holdout = 2, Em = 3 };

// Stable 64-bit mix of (master seed, replicate, role).
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t replicate, SeedRole role);

enum class FitStatus { Ok, Degenerate, NotConverged, NumericalFailure };
std::string to_string(FitStatus s);

struct CandidateRecord {
  FitStatus status = FitStatus::Ok;
  int iters = 0;
  double fixed_point_residual = 0.0;
  double max_trace_decrease = 0.0;
  CriteriaReport report;
  double loss_yy = 0.0;
  double loss_xy = 0.0;
};

struct ReplicateRecord {
  int index = 0;
  bool excluded = false;
  std::vector<CandidateRecord> candidates;
  // candidate index chosen by each criterion (order of kAllCriteria); -1 if excluded
  std::array<int, kAllCriteria.size()> selected{};
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int count = 0;
};

// Sample mean and sd / sqrt(count).
MeanSe mean_se(std::span<const double> values);

struct CandidateTable {
  std::string label;
  int d = 0;
  bool correctly_specified = false;
  int excluded = 0;  // replicates where this candidate's fit was unusable
  std::array<MeanSe, kAllCriteria.size()> delta_criteria;  // E(delta criterion)
  MeanSe risk_yy;  // 2n delta risk_{y;y}
  MeanSe risk_xy;  // 2n delta risk_{x;y}
};

struct CriterionTable {
  Criterion criterion = Criterion::Aic;
  std::vector<int> selection_counts;  // per candidate
  MeanSe selected_risk_yy;            // 2n delta risk of the selected model
  MeanSe selected_risk_xy;
};

struct StudyTables {
  int effective_b = 0;
  int excluded_replicates = 0;
  std::vector<CandidateTable> candidates;
  std::vector<CriterionTable> criteria;  // order of kAllCriteria
};

struct StudyResult {
  StudyConfig config;
  std::vector<ReplicateRecord> replicates;
  StudyTables tables;
};

enum class RiskKind { YY, XY };

// Per included replicate: 2n (loss(candidate) - loss(reference)).
std::vector<double> candidate_risk_series(const StudyResult& r, std::size_t candidate, RiskKind kind);
// Per included replicate: 2n (loss(selected by c) - loss(reference)).
std::vector<double> selected_risk_series(const StudyResult& r, Criterion c, RiskKind kind);
// Per included replicate: criterion(candidate) - criterion(reference).
std::vector<double> criterion_delta_series(const StudyResult& r, std::size_t candidate, Criterion c);

StudyTables aggregate(const StudyConfig& cfg, std::span<const ReplicateRecord> replicates);

// Runs every replicate (threads >= 1 workers) and aggregates in replicate
// order, so the result does not depend on the thread count. Throws
// TooManyDegenerate when more than 10% of replicates are unusable for some
// candidate; the completed result travels with the exception.
StudyResult run_study(const StudyConfig& cfg, int threads = 1);

class TooManyDegenerateStudy : public TooManyDegenerate {
 public:
  TooManyDegenerateStudy(const std::string& what, StudyResult result)
      : TooManyDegenerate(what), result_(std::move(result)) {}
  const StudyResult& result() const { return result_; }

 private:
  StudyResult result_;
};

ReplicateRecord run_replicate(const StudyConfig& cfg, int index);

}  // namespace misscrit
