// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace iqc {

// One 3-level absolute-category rating: 3 = good, 2 = fair, 1 = poor.
struct Rating {
    std::string subject_id;
    std::string image_id;
    int score = 0;
};

struct RatingTable {
    std::vector<Rating> entries;
};

// Scores must lie in {1, 2, 3}; a (subject, image) pair may appear once.
void validate_ratings(const RatingTable& table);

// CSV with header "subject_id,image_id,score".
RatingTable read_ratings_csv(const std::string& path);

struct MosRecord {
    std::string image_id;
    double mos = 0.0;
    double variance = 0.0; // sample variance, 0 when n == 1
    int n = 0;
};

// Per-image mean opinion score in first-appearance order.
std::vector<MosRecord> compute_mos(const RatingTable& table);

// CSV with header "image_id,mos,variance,n".
void write_mos_csv(const std::vector<MosRecord>& records, const std::string& path);

struct SubjectScreen {
    std::string subject_id;
    long p = 0;       // ratings at or above the per-image upper bound
    long q = 0;       // ratings at or below the per-image lower bound
    long n_rated = 0; // total ratings by this subject
    bool rejected = false;
};

struct ScreeningReport {
    std::vector<SubjectScreen> subjects;
};

// Outlier-subject screening.  Per image the score kurtosis beta2 picks the
// deviation bound (2 sigma when 2 <= beta2 <= 4, sqrt(20) sigma otherwise,
// sigma the sample standard deviation); a subject is rejected when
// (P+Q)/N > 0.05 and |P-Q|/(P+Q) < 0.3.  Images whose scores are all equal
// admit no deviations and are skipped.
ScreeningReport screen_subjects(const RatingTable& table);

// Removes all ratings by rejected subjects and warns for every image left
// with no ratings.
RatingTable drop_rejected(const RatingTable& table, const ScreeningReport& report);

// 5-parameter logistic regression
//   f(x) = b1*(0.5 - 1/(1 + exp(b2*(x - b3)))) + b4*x + b5
// fitted with a damped least-squares iteration from a data-driven start,
// plus seeded restarts; the linear parameters (b1, b4, b5) are re-solved
// exactly at the end, which makes the mapped Pearson correlation at least
// as large in magnitude as the raw one.
struct LogisticFit {
    std::array<double, 5> beta {};
    std::vector<double> fitted;
    double rms_residual = 0.0;
    std::vector<double> sse_history; // accepted-step objective, nonincreasing
};

std::vector<double> logistic_apply(const std::array<double, 5>& beta,
                                   const std::vector<double>& xs);

LogisticFit fit_logistic(const std::vector<double>& pred, const std::vector<double>& mos,
                         std::uint64_t seed = 0);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Pearson correlation, optionally after mapping pred through the fitted
// logistic curve.
double plcc(const std::vector<double>& pred, const std::vector<double>& mos,
            bool map_through_logistic = true);

// Fractional (average) ranks, 1-based; ties share their mean rank.
std::vector<double> average_ranks(const std::vector<double>& xs);

// Spearman rank correlation with average ranks for ties.
double srcc(const std::vector<double>& pred, const std::vector<double>& mos);

// Share of exact class matches.
double classification_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

struct CorrelationReport {
    double plcc = 0.0; // after logistic mapping
    double srcc = 0.0;
    bool has_acc = false;
    double acc = 0.0;
    std::array<double, 5> beta {};
    double residual = 0.0; // RMS residual of the logistic fit
};

CorrelationReport correlate(const std::vector<double>& pred, const std::vector<double>& mos,
                            std::uint64_t seed = 0);

} // namespace iqc
