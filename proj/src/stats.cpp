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

#include "iqc/stats.hpp"

#include "iqc/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace iqc {

namespace {

double mean_of(const std::vector<double>& xs)
{
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev_of(const std::vector<double>& xs)
{
    const double m = mean_of(xs);
    double acc = 0.0;
    for (double x : xs)
        acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::string trim_cr(std::string line)
{
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    return line;
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.push_back("");
    return out;
}

} // namespace

void validate_ratings(const RatingTable& table)
{
    std::set<std::pair<std::string, std::string>> seen;
    for (const Rating& r : table.entries) {
        require_arg(r.score >= 1 && r.score <= 3, "rating score outside {1, 2, 3}");
        require_arg(!r.subject_id.empty() && !r.image_id.empty(),
                    "rating with empty subject or image id");
        require_arg(seen.emplace(r.subject_id, r.image_id).second,
                    "duplicate rating for subject " + r.subject_id + ", image " + r.image_id);
    }
}

RatingTable read_ratings_csv(const std::string& path)
{
    std::ifstream is(path);
    require_state(is.good(), "cannot open " + path);
    std::string line;
    require_state(static_cast<bool>(std::getline(is, line)), path + ": empty file");
    require_state(trim_cr(line) == "subject_id,image_id,score",
                  path + ": expected header subject_id,image_id,score");
    RatingTable table;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim_cr(line);
        if (line.empty())
            continue;
        const std::vector<std::string> f = split_csv(line);
        require_state(f.size() == 3, path + ":" + std::to_string(lineno) + ": expected 3 fields");
        Rating r;
        r.subject_id = f[0];
        r.image_id = f[1];
        try {
            std::size_t pos = 0;
            r.score = std::stoi(f[2], &pos);
            require_state(pos == f[2].size(), "trailing characters");
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad score '"
                                     + f[2] + "'");
        }
        table.entries.push_back(std::move(r));
    }
    validate_ratings(table);
    return table;
}

std::vector<MosRecord> compute_mos(const RatingTable& table)
{
    validate_ratings(table);
    std::vector<std::string> order;
    std::map<std::string, std::vector<int>> by_image;
    for (const Rating& r : table.entries) {
        auto [it, inserted] = by_image.try_emplace(r.image_id);
        if (inserted)
            order.push_back(r.image_id);
        it->second.push_back(r.score);
    }
    std::vector<MosRecord> out;
    out.reserve(order.size());
    for (const std::string& id : order) {
        const std::vector<int>& scores = by_image[id];
        MosRecord rec;
        rec.image_id = id;
        rec.n = static_cast<int>(scores.size());
        rec.mos = std::accumulate(scores.begin(), scores.end(), 0.0) / rec.n;
        if (rec.n > 1) {
            double acc = 0.0;
            for (int s : scores)
                acc += (s - rec.mos) * (s - rec.mos);
            rec.variance = acc / (rec.n - 1);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_mos_csv(const std::vector<MosRecord>& records, const std::string& path)
{
    std::ofstream os(path);
    require_state(os.good(), "cannot write " + path);
    os << "image_id,mos,variance,n\n";
    char buf[64];
    for (const MosRecord& r : records) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%d\n", r.mos, r.variance, r.n);
        os << r.image_id << buf;
    }
    require_state(os.good(), "short write to " + path);
}

ScreeningReport screen_subjects(const RatingTable& table)
{
    validate_ratings(table);
    std::vector<std::string> subject_order;
    std::map<std::string, SubjectScreen> subjects;
    std::vector<std::string> image_order;
    std::map<std::string, std::vector<const Rating*>> by_image;
    for (const Rating& r : table.entries) {
        auto [sit, s_new] = subjects.try_emplace(r.subject_id);
        if (s_new) {
            sit->second.subject_id = r.subject_id;
            subject_order.push_back(r.subject_id);
        }
        sit->second.n_rated += 1;
        auto [iit, i_new] = by_image.try_emplace(r.image_id);
        if (i_new)
            image_order.push_back(r.image_id);
        iit->second.push_back(&r);
    }
    for (const std::string& id : image_order) {
        const std::vector<const Rating*>& ratings = by_image[id];
        const long n = static_cast<long>(ratings.size());
        if (n < 2)
            continue;
        double mean = 0.0;
        for (const Rating* r : ratings)
            mean += r->score;
        mean /= static_cast<double>(n);
        double m2 = 0.0, m4 = 0.0, ss = 0.0;
        for (const Rating* r : ratings) {
            const double d = r->score - mean;
            m2 += d * d;
            m4 += d * d * d * d;
            ss += d * d;
        }
        m2 /= static_cast<double>(n);
        m4 /= static_cast<double>(n);
        if (m2 == 0.0)
            continue;
        const double s = std::sqrt(ss / static_cast<double>(n - 1));
        const double beta2 = m4 / (m2 * m2);
        const double bound = (beta2 >= 2.0 && beta2 <= 4.0) ? 2.0 * s : std::sqrt(20.0) * s;
        for (const Rating* r : ratings) {
            SubjectScreen& subj = subjects[r->subject_id];
            if (r->score >= mean + bound)
                subj.p += 1;
            if (r->score <= mean - bound)
                subj.q += 1;
        }
    }
    ScreeningReport report;
    for (const std::string& id : subject_order) {
        SubjectScreen subj = subjects[id];
        const long pq = subj.p + subj.q;
        if (pq > 0 && subj.n_rated > 0) {
            const double share = static_cast<double>(pq) / static_cast<double>(subj.n_rated);
            const double balance = std::abs(static_cast<double>(subj.p - subj.q))
                                   / static_cast<double>(pq);
            subj.rejected = share > 0.05 && balance < 0.3;
        }
        report.subjects.push_back(std::move(subj));
    }
    return report;
}

RatingTable drop_rejected(const RatingTable& table, const ScreeningReport& report)
{
    std::set<std::string> rejected;
    for (const SubjectScreen& s : report.subjects)
        if (s.rejected)
            rejected.insert(s.subject_id);
    std::set<std::string> before, after;
    RatingTable out;
    for (const Rating& r : table.entries) {
        before.insert(r.image_id);
        if (rejected.count(r.subject_id) == 0) {
            out.entries.push_back(r);
            after.insert(r.image_id);
        }
    }
    for (const std::string& id : before)
        if (after.count(id) == 0)
            warn("image " + id + " has no ratings after screening; excluded");
    return out;
}

namespace {

double sigmoid(double z)
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double logistic_one(const std::array<double, 5>& b, double x)
{
    const double s = sigmoid(b[1] * (x - b[2]));
    return b[0] * (s - 0.5) + b[3] * x + b[4];
}

double sse_of(const std::array<double, 5>& b, const std::vector<double>& x,
              const std::vector<double>& y)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = logistic_one(b, x[i]) - y[i];
        acc += r * r;
    }
    return acc;
}

// Solves A d = rhs (n x n, row-major) by Gaussian elimination with partial
// pivoting; returns false on a singular system.
bool solve_dense(std::vector<double> a, std::vector<double> rhs, int n, std::vector<double>& out)
{
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col]))
                piv = r;
        if (std::abs(a[piv * n + col]) < 1e-300)
            return false;
        if (piv != col) {
            for (int k = 0; k < n; ++k)
                std::swap(a[col * n + k], a[piv * n + k]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            for (int k = col; k < n; ++k)
                a[r * n + k] -= f * a[col * n + k];
            rhs[r] -= f * rhs[col];
        }
    }
    out.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = rhs[r];
        for (int k = r + 1; k < n; ++k)
            acc -= a[r * n + k] * out[k];
        out[r] = acc / a[r * n + r];
    }
    return true;
}

// Re-solves the linear parameters b1, b4, b5 exactly for fixed b2, b3.
// This projects y onto span{sigmoid feature, x, 1}, so the residual is
// orthogonal to x and the fit can only improve on the raw correlation.
void polish_linear(std::array<double, 5>& b, const std::vector<double>& x,
                   const std::vector<double>& y)
{
    const std::size_t n = x.size();
    std::vector<double> phi(n);
    for (std::size_t i = 0; i < n; ++i)
        phi[i] = sigmoid(b[1] * (x[i] - b[2])) - 0.5;
    std::vector<double> ata(9, 0.0), atb(3, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double f[3] = {phi[i], x[i], 1.0};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c)
                ata[r * 3 + c] += f[r] * f[c];
            atb[r] += f[r] * y[i];
        }
    }
    for (int r = 0; r < 3; ++r)
        ata[r * 3 + r] += 1e-12;
    std::vector<double> sol;
    if (solve_dense(ata, atb, 3, sol)) {
        std::array<double, 5> cand = b;
        cand[0] = sol[0];
        cand[3] = sol[1];
        cand[4] = sol[2];
        if (sse_of(cand, x, y) <= sse_of(b, x, y))
            b = cand;
    }
}

struct LmRun {
    std::array<double, 5> beta {};
    double sse = 0.0;
    std::vector<double> history;
};

LmRun run_lm(std::array<double, 5> b, const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    double lambda = 1e-3;
    double sse = sse_of(b, x, y);
    LmRun run;
    run.history.push_back(sse);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<double> jtj(25, 0.0), jtr(5, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = b[1] * (x[i] - b[2]);
            const double s = sigmoid(z);
            const double sp = s * (1.0 - s);
            const double j[5] = {s - 0.5, b[0] * sp * (x[i] - b[2]), -b[0] * sp * b[1], x[i], 1.0};
            const double r = logistic_one(b, x[i]) - y[i];
            for (int a = 0; a < 5; ++a) {
                for (int c = 0; c < 5; ++c)
                    jtj[a * 5 + c] += j[a] * j[c];
                jtr[a] += j[a] * r;
            }
        }
        bool moved = false;
        for (int attempt = 0; attempt < 25 && !moved; ++attempt) {
            std::vector<double> damped = jtj;
            for (int d = 0; d < 5; ++d)
                damped[d * 5 + d] += lambda * (jtj[d * 5 + d] + 1e-12);
            std::vector<double> neg_jtr(5);
            for (int d = 0; d < 5; ++d)
                neg_jtr[d] = -jtr[d];
            std::vector<double> delta;
            if (!solve_dense(damped, neg_jtr, 5, delta)) {
                lambda *= 4.0;
                continue;
            }
            std::array<double, 5> cand = b;
            for (int d = 0; d < 5; ++d)
                cand[d] += delta[d];
            const double cand_sse = sse_of(cand, x, y);
            if (std::isfinite(cand_sse) && cand_sse < sse) {
                b = cand;
                sse = cand_sse;
                run.history.push_back(sse);
                lambda = std::max(lambda / 3.0, 1e-12);
                moved = true;
            } else {
                lambda *= 4.0;
            }
        }
        if (!moved || lambda > 1e14)
            break;
        const std::size_t hn = run.history.size();
        if (hn >= 2 && run.history[hn - 2] - run.history[hn - 1]
                           < 1e-14 * (1.0 + run.history[hn - 2]))
            break;
    }
    run.beta = b;
    run.sse = sse;
    return run;
}

} // namespace

std::vector<double> logistic_apply(const std::array<double, 5>& beta,
                                   const std::vector<double>& xs)
{
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        out[i] = logistic_one(beta, xs[i]);
    return out;
}

LogisticFit fit_logistic(const std::vector<double>& pred, const std::vector<double>& mos,
                         std::uint64_t seed)
{
    require_arg(pred.size() == mos.size(), "prediction and score lists differ in length");
    require_arg(pred.size() >= 3, "logistic fit needs at least 3 points");
    const double sx = stddev_of(pred);
    const double sy = stddev_of(mos);
    require_domain(sx > 0.0, "constant predictions cannot be fitted");
    const auto [ymin, ymax] = std::minmax_element(mos.begin(), mos.end());
    std::array<double, 5> init = {*ymax - *ymin, 1.0 / sx, mean_of(pred), 0.0, mean_of(mos)};
    if (init[0] == 0.0)
        init[0] = 1.0;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    LmRun best;
    best.sse = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < 6; ++restart) {
        std::array<double, 5> b = init;
        if (restart > 0) {
            b[0] *= std::exp(0.25 * gauss(rng));
            b[1] *= std::exp(0.5 * gauss(rng));
            b[2] += sx * gauss(rng);
            b[3] += 0.1 * (sy / sx) * gauss(rng);
            b[4] += 0.25 * (sy > 0.0 ? sy : 1.0) * gauss(rng);
        }
        LmRun run = run_lm(b, pred, mos);
        polish_linear(run.beta, pred, mos);
        run.sse = sse_of(run.beta, pred, mos);
        run.history.push_back(run.sse);
        if (run.sse < best.sse)
            best = std::move(run);
    }
    LogisticFit fit;
    fit.beta = best.beta;
    fit.fitted = logistic_apply(best.beta, pred);
    fit.rms_residual = std::sqrt(best.sse / static_cast<double>(pred.size()));
    fit.sse_history = std::move(best.history);
    return fit;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
    require_arg(a.size() == b.size(), "correlation inputs differ in length");
    require_arg(a.size() >= 2, "correlation needs at least 2 points");
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    require_domain(va > 0.0 && vb > 0.0, "correlation of a constant sequence");
    return cov / std::sqrt(va * vb);
}

double plcc(const std::vector<double>& pred, const std::vector<double>& mos,
            bool map_through_logistic)
{
    if (!map_through_logistic)
        return pearson(pred, mos);
    const LogisticFit fit = fit_logistic(pred, mos);
    double var = 0.0;
    const double m = mean_of(fit.fitted);
    for (double v : fit.fitted)
        var += (v - m) * (v - m);
    if (var <= 1e-24) {
        warn("logistic fit collapsed to a constant; reporting zero correlation");
        return 0.0;
    }
    return pearson(fit.fitted, mos);
}

std::vector<double> average_ranks(const std::vector<double>& xs)
{
    const std::size_t n = xs.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]])
            ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double srcc(const std::vector<double>& pred, const std::vector<double>& mos)
{
    require_arg(pred.size() == mos.size(), "correlation inputs differ in length");
    return pearson(average_ranks(pred), average_ranks(mos));
}

double classification_accuracy(const std::vector<int>& pred, const std::vector<int>& truth)
{
    require_arg(pred.size() == truth.size(), "class lists differ in length");
    require_domain(!pred.empty(), "accuracy of an empty list");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i])
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

CorrelationReport correlate(const std::vector<double>& pred, const std::vector<double>& mos,
                            std::uint64_t seed)
{
    const LogisticFit fit = fit_logistic(pred, mos, seed);
    CorrelationReport rep;
    rep.beta = fit.beta;
    rep.residual = fit.rms_residual;
    rep.srcc = srcc(pred, mos);
    double var = 0.0;
    const double m = mean_of(fit.fitted);
    for (double v : fit.fitted)
        var += (v - m) * (v - m);
    if (var <= 1e-24) {
        warn("logistic fit collapsed to a constant; reporting zero correlation");
        rep.plcc = 0.0;
    } else {
        rep.plcc = pearson(fit.fitted, mos);
    }
    return rep;
}

} // namespace iqc
