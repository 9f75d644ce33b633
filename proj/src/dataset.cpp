#include "mmrm/dataset.hpp"

#include "mmrm/errors.hpp"

#include <algorithm>
#include <numeric>

namespace mmrm {

namespace {

void check_visit(int visit, int p) {
    if (visit < 1 || visit > p) {
        throw DimensionMismatchError("visit " + std::to_string(visit) + " outside 1.." + std::to_string(p));
    }
}

void check_shapes(const std::vector<SubjectRecord>& raw, int p) {
    if (p < 1) {
        throw DimensionMismatchError("visit count must be positive");
    }
    const std::size_t qstar = raw.empty() ? 0 : raw.front().covariates.size();
    for (const auto& s : raw) {
        if (static_cast<int>(s.outcomes.size()) != p) {
            throw DimensionMismatchError("subject '" + s.id + "' has " + std::to_string(s.outcomes.size()) +
                                         " outcome slots, expected " + std::to_string(p));
        }
        if (s.covariates.size() != qstar) {
            throw DimensionMismatchError("subject '" + s.id + "' has a covariate row of different length");
        }
        if (s.group != 0 && s.group != 1) {
            throw InvalidSpecError("subject '" + s.id + "' has group " + std::to_string(s.group));
        }
    }
}

bool has_gap(const SubjectRecord& s) {
    return observed_prefix(s) != static_cast<int>(std::count_if(s.outcomes.begin(), s.outcomes.end(),
                                                                [](const auto& y) { return y.has_value(); }));
}

}  // namespace

int observed_prefix(const SubjectRecord& subject) {
    int r = 0;
    while (r < static_cast<int>(subject.outcomes.size()) && subject.outcomes[r].has_value()) {
        ++r;
    }
    return r;
}

int MonotoneDataset::observed(int visit) const {
    check_visit(visit, p_);
    return counts_[visit - 1];
}

int MonotoneDataset::observed(int visit, int group) const {
    check_visit(visit, p_);
    return group_counts_.at(group)[visit - 1];
}

int MonotoneDataset::pattern_count(int pattern, int group) const {
    int c = 0;
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        if (patterns_[i] == pattern && subjects_[i].group == group) {
            ++c;
        }
    }
    return c;
}

Matrix MonotoneDataset::design(int visit) const {
    const int rows = observed(visit);
    const int q = fixed_effect_count();
    Matrix x(rows, q);
    for (int i = 0; i < rows; ++i) {
        const auto& s = subjects_[i];
        x(i, 0) = 1.0;
        for (int k = 0; k < qstar_; ++k) {
            x(i, 1 + k) = s.covariates[k];
        }
        x(i, q - 1) = static_cast<double>(s.group);
    }
    return x;
}

Matrix MonotoneDataset::outcomes(int visit) const {
    const int rows = observed(visit);
    Matrix y(rows, visit);
    for (int i = 0; i < rows; ++i) {
        for (int t = 0; t < visit; ++t) {
            y(i, t) = *subjects_[i].outcomes[t];
        }
    }
    return y;
}

MonotoneDataset MonotoneDataset::truncated(int last) const {
    check_visit(last, p_);
    std::vector<SubjectRecord> raw = subjects_;
    for (auto& s : raw) {
        s.outcomes.resize(last);
    }
    return validate_monotone(std::move(raw), last);
}

MonotoneDataset validate_monotone(std::vector<SubjectRecord> raw, int p) {
    check_shapes(raw, p);

    std::vector<int> pattern(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& s = raw[i];
        const int r = observed_prefix(s);
        for (int t = r; t < p; ++t) {
            if (s.outcomes[t].has_value()) {
                throw NonMonotoneError(s.id, t + 1);
            }
        }
        pattern[i] = r;
    }

    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pattern[a] > pattern[b]; });

    MonotoneDataset out;
    out.p_ = p;
    out.qstar_ = raw.empty() ? 0 : static_cast<int>(raw.front().covariates.size());
    out.subjects_.reserve(raw.size());
    out.patterns_.reserve(raw.size());
    out.counts_.assign(p, 0);
    out.group_counts_.assign(2, std::vector<int>(p, 0));
    for (std::size_t idx : order) {
        const int r = pattern[idx];
        for (int t = 0; t < r; ++t) {
            ++out.counts_[t];
            ++out.group_counts_[raw[idx].group][t];
        }
        out.patterns_.push_back(r);
        out.subjects_.push_back(std::move(raw[idx]));
    }
    for (int j = 0; j < p; ++j) {
        if (out.counts_[j] == 0) {
            throw EmptyVisitError(j + 1);
        }
    }
    return out;
}

MonotoneDataset monotonize(std::vector<SubjectRecord> raw, int p, MonotoneStrategy strategy) {
    check_shapes(raw, p);
    switch (strategy) {
        case MonotoneStrategy::ExcludeSubjects: {
            std::erase_if(raw, has_gap);
            break;
        }
        case MonotoneStrategy::TruncateAtFirstGap: {
            for (auto& s : raw) {
                const int r = observed_prefix(s);
                for (int t = r; t < p; ++t) {
                    s.outcomes[t].reset();
                }
            }
            break;
        }
        case MonotoneStrategy::RegressionImpute: {
            const int qstar = raw.empty() ? 0 : static_cast<int>(raw.front().covariates.size());
            for (int j = 0; j < p; ++j) {
                std::vector<std::size_t> gaps;
                std::vector<std::size_t> rows;
                for (std::size_t i = 0; i < raw.size(); ++i) {
                    const auto& s = raw[i];
                    if (observed_prefix(s) < j) {
                        continue;
                    }
                    if (s.outcomes[j].has_value()) {
                        rows.push_back(i);
                    } else if (std::any_of(s.outcomes.begin() + j + 1, s.outcomes.end(),
                                           [](const auto& y) { return y.has_value(); })) {
                        gaps.push_back(i);
                    }
                }
                if (gaps.empty()) {
                    continue;
                }
                const int cols = qstar + 2 + j;
                if (static_cast<int>(rows.size()) < cols) {
                    throw InsufficientDataError("imputation regression for visit " + std::to_string(j + 1) + " has " +
                                                std::to_string(rows.size()) + " rows for " + std::to_string(cols) +
                                                " parameters");
                }
                auto predictor = [&](const SubjectRecord& s) {
                    Vector z(cols);
                    z(0) = 1.0;
                    for (int k = 0; k < qstar; ++k) {
                        z(1 + k) = s.covariates[k];
                    }
                    z(1 + qstar) = static_cast<double>(s.group);
                    for (int t = 0; t < j; ++t) {
                        z(2 + qstar + t) = *s.outcomes[t];
                    }
                    return z;
                };
                Matrix z(rows.size(), cols);
                Vector y(rows.size());
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    z.row(r) = predictor(raw[rows[r]]).transpose();
                    y(r) = *raw[rows[r]].outcomes[j];
                }
                Eigen::ColPivHouseholderQR<Matrix> qr(z);
                if (qr.rank() < cols) {
                    throw InsufficientDataError("imputation regression for visit " + std::to_string(j + 1) +
                                                " is rank deficient");
                }
                const Vector coef = qr.solve(y);
                for (std::size_t i : gaps) {
                    raw[i].outcomes[j] = predictor(raw[i]).dot(coef);
                }
            }
            break;
        }
    }
    return validate_monotone(std::move(raw), p);
}

}  // namespace mmrm
