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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "iqc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

using namespace iqc;

namespace {

void add(RatingTable& t, const std::string& subject, const std::string& image, int score)
{
    t.entries.push_back({subject, image, score});
}

std::string temp_file(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / ("iqc_stats_" + name)).string();
}

// Panel with 21 consistent raters plus one special rater whose behavior
// is chosen per test.  21 identical scores put the outlier beyond the
// non-normal deviation bound (the margin needs at least 22 raters).
RatingTable panel(int images, int crowd_score, int (*special)(int image))
{
    RatingTable t;
    for (int img = 0; img < images; ++img) {
        char img_id[16];
        std::snprintf(img_id, sizeof img_id, "i%03d", img);
        for (int s = 0; s < 21; ++s)
            add(t, "crowd" + std::to_string(s), img_id, crowd_score);
        add(t, "special", img_id, special(img));
    }
    return t;
}

const SubjectScreen& find_subject(const ScreeningReport& rep, const std::string& id)
{
    for (const SubjectScreen& s : rep.subjects)
        if (s.subject_id == id)
            return s;
    REQUIRE(false);
    static SubjectScreen dummy;
    return dummy;
}

} // namespace

TEST_CASE("mean opinion scores match hand values")
{
    RatingTable t;
    const int scores[5] = {3, 2, 3, 2, 3};
    for (int s = 0; s < 5; ++s)
        add(t, "s" + std::to_string(s), "img", scores[s]);
    const std::vector<MosRecord> mos = compute_mos(t);
    REQUIRE(mos.size() == 1);
    CHECK(mos[0].mos == doctest::Approx(2.6).epsilon(1e-15));
    CHECK(mos[0].variance == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(mos[0].n == 5);

    RatingTable u;
    for (int s = 0; s < 5; ++s)
        add(u, "s" + std::to_string(s), "img", 2);
    const std::vector<MosRecord> flat = compute_mos(u);
    CHECK(flat[0].mos == 2.0);
    CHECK(flat[0].variance == 0.0);
}

TEST_CASE("mean opinion scores keep first-appearance image order")
{
    RatingTable t;
    add(t, "a", "zebra", 3);
    add(t, "a", "apple", 1);
    add(t, "b", "zebra", 2);
    add(t, "b", "apple", 2);
    const std::vector<MosRecord> mos = compute_mos(t);
    REQUIRE(mos.size() == 2);
    CHECK(mos[0].image_id == "zebra");
    CHECK(mos[1].image_id == "apple");
    CHECK(mos[0].mos == 2.5);
}

TEST_CASE("mean opinion scores agree with a direct recomputation on random tables")
{
    std::mt19937_64 rng(17);
    RatingTable t;
    std::map<std::string, std::vector<int>> truth;
    for (int s = 0; s < 6; ++s) {
        for (int img = 0; img < 10; ++img) {
            const int score = 1 + static_cast<int>(rng() % 3);
            const std::string id = "i" + std::to_string(img);
            add(t, "s" + std::to_string(s), id, score);
            truth[id].push_back(score);
        }
    }
    for (const MosRecord& rec : compute_mos(t)) {
        const std::vector<int>& xs = truth[rec.image_id];
        double mean = 0.0;
        for (int x : xs)
            mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (int x : xs)
            var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size() - 1);
        CHECK(rec.mos == doctest::Approx(mean).epsilon(1e-14));
        CHECK(rec.variance == doctest::Approx(var).epsilon(1e-12));
        CHECK(rec.n == static_cast<int>(xs.size()));
    }
}

TEST_CASE("rating validation rejects out-of-scale scores and duplicates")
{
    RatingTable t;
    add(t, "a", "img", 4);
    CHECK_THROWS_AS(validate_ratings(t), std::invalid_argument);
    RatingTable u;
    add(u, "a", "img", 2);
    add(u, "a", "img", 3);
    CHECK_THROWS_AS(validate_ratings(u), std::invalid_argument);
    RatingTable v;
    add(v, "", "img", 2);
    CHECK_THROWS_AS(validate_ratings(v), std::invalid_argument);
}

TEST_CASE("rating and score tables survive a CSV round trip")
{
    const std::string ratings_path = temp_file("ratings.csv");
    {
        std::ofstream os(ratings_path);
        os << "subject_id,image_id,score\n";
        os << "s1,imgA,3\n";
        os << "s1,imgB,1\n";
        os << "s2,imgA,2\n";
    }
    const RatingTable t = read_ratings_csv(ratings_path);
    REQUIRE(t.entries.size() == 3);
    CHECK(t.entries[1].subject_id == "s1");
    CHECK(t.entries[1].image_id == "imgB");
    CHECK(t.entries[1].score == 1);

    const std::string mos_path = temp_file("mos.csv");
    write_mos_csv(compute_mos(t), mos_path);
    std::ifstream is(mos_path);
    std::string line;
    std::getline(is, line);
    CHECK(line == "image_id,mos,variance,n");
    std::getline(is, line);
    CHECK(line == "imgA,2.500000,0.500000,2");
    std::getline(is, line);
    CHECK(line == "imgB,1.000000,0.000000,1");
    std::filesystem::remove(ratings_path);
    std::filesystem::remove(mos_path);
}

TEST_CASE("malformed rating files are rejected with the offending line")
{
    const std::string path = temp_file("bad.csv");
    {
        std::ofstream os(path);
        os << "subject,image,score\n";
    }
    CHECK_THROWS_AS(read_ratings_csv(path), std::runtime_error);
    {
        std::ofstream os(path);
        os << "subject_id,image_id,score\n";
        os << "s1,imgA,wat\n";
    }
    CHECK_THROWS_AS(read_ratings_csv(path), std::runtime_error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_ratings_csv(temp_file("missing.csv")), std::runtime_error);
}

TEST_CASE("an erratic rater is rejected by screening")
{
    // Crowd rates 2 everywhere; the special rater alternates 1 and 3, so
    // deviations split evenly between the two sides.
    RatingTable t = panel(100, 2, [](int img) { return img % 2 == 0 ? 1 : 3; });
    // Unanimous images carry no deviation information and are skipped.
    for (int e = 0; e < 5; ++e) {
        const std::string id = "flat" + std::to_string(e);
        for (int s = 0; s < 21; ++s)
            add(t, "crowd" + std::to_string(s), id, 2);
        add(t, "special", id, 2);
    }
    const ScreeningReport rep = screen_subjects(t);
    const SubjectScreen& err = find_subject(rep, "special");
    CHECK(err.p == 50);
    CHECK(err.q == 50);
    CHECK(err.n_rated == 105);
    CHECK(err.rejected);
    for (const SubjectScreen& s : rep.subjects)
        if (s.subject_id != "special")
            CHECK(!s.rejected);
}

TEST_CASE("a consistently biased rater is kept")
{
    const RatingTable t = panel(40, 3, [](int) { return 1; });
    const ScreeningReport rep = screen_subjects(t);
    const SubjectScreen& pess = find_subject(rep, "special");
    CHECK(pess.q == 40);
    CHECK(pess.p == 0);
    CHECK(!pess.rejected); // one-sided deviation signals bias, not noise
}

TEST_CASE("a unanimous panel rejects nobody")
{
    const RatingTable t = panel(30, 2, [](int) { return 2; });
    for (const SubjectScreen& s : screen_subjects(t).subjects) {
        CHECK(s.p == 0);
        CHECK(s.q == 0);
        CHECK(!s.rejected);
    }
}

TEST_CASE("screening decisions do not depend on entry order")
{
    RatingTable t = panel(100, 2, [](int img) { return img % 2 == 0 ? 1 : 3; });
    std::map<std::string, bool> before;
    for (const SubjectScreen& s : screen_subjects(t).subjects)
        before[s.subject_id] = s.rejected;
    std::mt19937_64 rng(23);
    std::shuffle(t.entries.begin(), t.entries.end(), rng);
    for (const SubjectScreen& s : screen_subjects(t).subjects)
        CHECK(before.at(s.subject_id) == s.rejected);
}

TEST_CASE("dropping a rejected rater removes their images when orphaned")
{
    RatingTable t = panel(100, 2, [](int img) { return img % 2 == 0 ? 1 : 3; });
    add(t, "special", "orphan", 2); // rated only by the rejected subject
    const ScreeningReport rep = screen_subjects(t);
    REQUIRE(find_subject(rep, "special").rejected);
    const RatingTable kept = drop_rejected(t, rep);
    CHECK(kept.entries.size() == t.entries.size() - 101);
    for (const Rating& r : kept.entries) {
        CHECK(r.subject_id != "special");
        CHECK(r.image_id != "orphan");
    }
}

TEST_CASE("rank correlation reproduces hand-computed values")
{
    CHECK(srcc({1, 2, 3, 5, 4}, {1, 2, 3, 4, 5}) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(pearson({1, 2, 3, 5, 4}, {1, 2, 3, 4, 5}) == doctest::Approx(0.9).epsilon(1e-12));
    // Midranks for the tie: [1.5, 1.5, 3] against [1, 2, 3].
    CHECK(srcc({1, 1, 2}, {1, 2, 3})
          == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
    CHECK(pearson({1, 2, 3}, {10, 20, 30}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson({3, 2, 1}, {10, 20, 30}) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("rank correlation is exactly invariant under strictly monotone maps")
{
    std::mt19937_64 rng(29);
    std::vector<double> pred(30), mos(30);
    for (double& v : pred)
        v = static_cast<double>(rng() % 10000) / 10.0;
    for (double& v : mos)
        v = std::uniform_real_distribution<double>(1.0, 3.0)(rng);
    const double base = srcc(pred, mos);
    for (int t = 0; t < 20; ++t) {
        const double a = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
        const double c = std::uniform_real_distribution<double>(-10.0, 10.0)(rng);
        std::vector<double> mapped(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double x = pred[i] / 100.0;
            mapped[i] = a * x * x * x + 0.5 * x + c;
        }
        CHECK(srcc(mapped, mos) == base);
    }
}

TEST_CASE("correlation rejects degenerate input")
{
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(pearson({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(pearson({2, 2, 2}, {1, 2, 3}), std::domain_error);
    CHECK_THROWS_AS(srcc({1, 2, 3}, {5, 5, 5}), std::domain_error);
}

TEST_CASE("the logistic fit recovers a noise-free curve")
{
    const std::array<double, 5> beta = {2.0, 1.5, 0.0, 0.1, 2.0};
    std::vector<double> xs(60);
    for (std::size_t i = 0; i < xs.size(); ++i)
        xs[i] = -3.0 + 6.0 * static_cast<double>(i) / (xs.size() - 1);
    const std::vector<double> ys = logistic_apply(beta, xs);
    const LogisticFit fit = fit_logistic(xs, ys);
    CHECK(fit.rms_residual <= 1e-4);
    REQUIRE(fit.fitted.size() == xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        CHECK(std::abs(fit.fitted[i] - ys[i]) < 1e-3);
}

TEST_CASE("the logistic fit reproduces an exact linear relation")
{
    std::vector<double> xs(20);
    for (std::size_t i = 0; i < xs.size(); ++i)
        xs[i] = 1.0 + 0.1 * static_cast<double>(i);
    const LogisticFit fit = fit_logistic(xs, xs);
    CHECK(fit.rms_residual <= 1e-6);
}

TEST_CASE("accepted fit steps never increase the objective")
{
    std::mt19937_64 rng(31);
    std::vector<double> xs(50), ys(50);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
        ys[i] = 2.0 + std::tanh(1.3 * xs[i])
                + 0.05 * std::normal_distribution<double>(0.0, 1.0)(rng);
    }
    const LogisticFit fit = fit_logistic(xs, ys);
    REQUIRE(fit.sse_history.size() >= 2);
    for (std::size_t i = 1; i < fit.sse_history.size(); ++i)
        CHECK(fit.sse_history[i] <= fit.sse_history[i - 1] + 1e-12);
}

TEST_CASE("the logistic remap never lowers the linear correlation magnitude")
{
    std::mt19937_64 rng(37);
    std::vector<double> mos(60), pred(60);
    for (std::size_t i = 0; i < mos.size(); ++i) {
        mos[i] = std::uniform_real_distribution<double>(1.0, 3.0)(rng);
        pred[i] = std::exp(1.5 * mos[i])
                  + 0.5 * std::normal_distribution<double>(0.0, 1.0)(rng);
    }
    const double raw = std::abs(pearson(pred, mos));
    const double mapped = std::abs(plcc(pred, mos, true));
    CHECK(mapped >= raw - 1e-12);
}

TEST_CASE("fitting degenerate prediction sets is an error")
{
    CHECK_THROWS_AS(fit_logistic({2, 2, 2, 2}, {1, 2, 3, 2}), std::domain_error);
    CHECK_THROWS_AS(fit_logistic({1, 2}, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(fit_logistic({1, 2, 3}, {1, 2}), std::invalid_argument);
}

TEST_CASE("classification accuracy counts exact matches")
{
    CHECK(classification_accuracy({0, 1, 2, 3}, {0, 1, 2, 2}) == 0.75);
    CHECK(classification_accuracy({1, 1}, {1, 1}) == 1.0);
    CHECK_THROWS_AS(classification_accuracy({}, {}), std::domain_error);
    CHECK_THROWS_AS(classification_accuracy({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("the combined correlation report is consistent on clean data")
{
    const std::array<double, 5> beta = {1.2, 2.0, 0.3, 0.0, 2.0};
    std::vector<double> xs(40);
    for (std::size_t i = 0; i < xs.size(); ++i)
        xs[i] = -2.0 + 4.0 * static_cast<double>(i) / (xs.size() - 1);
    const std::vector<double> ys = logistic_apply(beta, xs);
    const CorrelationReport rep = correlate(xs, ys);
    CHECK(rep.srcc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.plcc == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.residual <= 1e-4);
}
