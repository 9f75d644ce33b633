#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace mmrm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One randomized subject. Missing outcomes are empty optionals.
struct SubjectRecord {
    std::string id;
    int group = 0;                              // 0 placebo, 1 active
    std::vector<double> covariates;             // x_b, baseline outcome usually first
    std::vector<std::optional<double>> outcomes;  // visits 1..p
};

/// Subjects whose observed outcomes form a prefix of the visit sequence,
/// ordered by descending dropout pattern so that the first n_j subjects are
/// exactly those observed at visit j.
///
/// Visits are numbered 1..p in every accessor taking a visit argument.
class MonotoneDataset {
public:
    int visits() const noexcept { return p_; }
    int covariate_count() const noexcept { return qstar_; }
    /// Columns of the design row (1, x_b, g).
    int fixed_effect_count() const noexcept { return qstar_ + 2; }
    int size() const noexcept { return static_cast<int>(subjects_.size()); }

    const std::vector<SubjectRecord>& subjects() const noexcept { return subjects_; }
    /// r_i for each subject in stored order.
    const std::vector<int>& patterns() const noexcept { return patterns_; }

    /// n_j: subjects observed at visit j.
    int observed(int visit) const;
    /// n_gj for group g in {0, 1}.
    int observed(int visit, int group) const;
    /// Number of subjects with r_i == s, per group.
    int pattern_count(int pattern, int group) const;

    /// n_j x q design block X_oj with rows (1, x_b', g).
    Matrix design(int visit) const;
    /// n_j x (visit) block of outcomes y_1..y_visit for the subjects observed at `visit`.
    Matrix outcomes(int visit) const;

    /// Same data with visits after `last` discarded.
    MonotoneDataset truncated(int last) const;

private:
    friend MonotoneDataset validate_monotone(std::vector<SubjectRecord> raw, int p);

    int p_ = 0;
    int qstar_ = 0;
    std::vector<SubjectRecord> subjects_;
    std::vector<int> patterns_;
    std::vector<int> counts_;                     // n_j, j = 1..p at index j-1
    std::vector<std::vector<int>> group_counts_;  // [g][j-1]
};

/// Checks the prefix property, computes patterns and sorts subjects by
/// descending pattern (stable within a pattern).
///
/// Throws NonMonotoneError, EmptyVisitError, DimensionMismatchError or
/// InvalidSpecError (group not in {0,1}).
MonotoneDataset validate_monotone(std::vector<SubjectRecord> raw, int p);

enum class MonotoneStrategy { ExcludeSubjects, TruncateAtFirstGap, RegressionImpute };

/// Converts intermittent missingness to a monotone pattern.
///
/// RegressionImpute fills a gap at visit j with the least-squares prediction
/// from regressing y_j on (1, x_b, g, y_1..y_{j-1}) over subjects with
/// y_1..y_j available; gaps are processed in visit order so earlier
/// imputations feed later regressions.
MonotoneDataset monotonize(std::vector<SubjectRecord> raw, int p, MonotoneStrategy strategy);

/// Last visit before the first missing one (0 if visit 1 is missing).
int observed_prefix(const SubjectRecord& subject);

}  // namespace mmrm
