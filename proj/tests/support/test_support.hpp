#pragma once

// Helpers shared by the unit tests and the acceptance runner: fixture
// paths, random design matrices, exact and iterative reference solvers, and
// source-text mutators that must not change any layer-2 metric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <gmpxx.h>

#include "vulnscore/findings.hpp"
#include "vulnscore/linear_model.hpp"
#include "vulnscore/rng.hpp"

namespace vulnscore::testing {

inline std::filesystem::path fixture_dir() { return VULNSCORE_FIXTURE_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("vulnscore-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Unit-free design matrix over columns f1..fp with the given instance weights.
inline DesignMatrix make_design(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
    DesignMatrix m;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        m.features.push_back("f" + std::to_string(j + 1));
        m.columns.push_back(static_cast<std::size_t>(j));
        m.imputation.push_back(x.col(j).mean());
    }
    m.x = x;
    m.y = y;
    m.weights = weights;
    return m;
}

/// Two Gaussian classes, the vulnerable one shifted by `shift` along every
/// axis. Both classes get at least two members.
inline DesignMatrix random_design(Rng& rng, std::size_t n, std::size_t p, double shift, bool weighted) {
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = i < 2 || (i >= 4 && rng.uniform() < 0.6);
        y(i) = pos ? 1.0 : -1.0;
        for (std::size_t j = 0; j < p; ++j)
            x(i, j) = rng.normal() * (0.5 + static_cast<double>(j) * 0.3) + (pos ? shift : 0.0);
        w(i) = weighted ? 1.0 + std::floor(rng.uniform() * 11.0) / 10.0 : 1.0;
    }
    return make_design(x, y, w);
}

// ---------------------------------------------------------------------------
// Fisher discriminant reference, exact rational arithmetic.
//
// Standardizing with population variances v_j turns the regularized system
// (S_z + r I) w_z = d_z into (S + r diag(v)) u = d on raw data, with
// u = w_z / sd and r = ridge * sum_j(S_jj / v_j) / p. Every input double is
// an exact rational, so the solve below carries no rounding at all.

inline std::vector<mpq_class> solve_exact(std::vector<std::vector<mpq_class>> a, std::vector<mpq_class> b) {
    const std::size_t p = b.size();
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        while (piv < p && a[piv][c] == 0)
            ++piv;
        if (piv == p)
            return {};
        std::swap(a[piv], a[c]);
        std::swap(b[piv], b[c]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c || a[r][c] == 0)
                continue;
            const mpq_class f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < p; ++k)
                a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<mpq_class> out(p);
    for (std::size_t c = 0; c < p; ++c)
        out[c] = b[c] / a[c][c];
    return out;
}

/// Unit raw-scale direction of the regularized Fisher discriminant; empty
/// when the regularized scatter is singular.
inline std::vector<double> fda_oracle_direction(const DesignMatrix& m, double ridge) {
    const auto n = static_cast<std::size_t>(m.x.rows());
    const auto p = static_cast<std::size_t>(m.x.cols());
    std::vector<std::vector<mpq_class>> x(n, std::vector<mpq_class>(p));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            x[i][j] = m.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

    std::vector<mpq_class> var(p);
    for (std::size_t j = 0; j < p; ++j) {
        mpq_class mean = 0;
        for (std::size_t i = 0; i < n; ++i)
            mean += x[i][j];
        mean /= static_cast<unsigned long>(n);
        for (std::size_t i = 0; i < n; ++i)
            var[j] += (x[i][j] - mean) * (x[i][j] - mean);
        var[j] /= static_cast<unsigned long>(n);
    }

    std::vector<mpq_class> mu_pos(p), mu_neg(p);
    mpq_class w_pos = 0, w_neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const mpq_class w = m.weights(static_cast<Eigen::Index>(i));
        const bool pos = m.y(static_cast<Eigen::Index>(i)) > 0;
        for (std::size_t j = 0; j < p; ++j)
            (pos ? mu_pos : mu_neg)[j] += w * x[i][j];
        (pos ? w_pos : w_neg) += w;
    }
    for (std::size_t j = 0; j < p; ++j) {
        mu_pos[j] /= w_pos;
        mu_neg[j] /= w_neg;
    }

    std::vector<std::vector<mpq_class>> s(p, std::vector<mpq_class>(p));
    for (std::size_t i = 0; i < n; ++i) {
        const mpq_class w = m.weights(static_cast<Eigen::Index>(i));
        const auto& mu = m.y(static_cast<Eigen::Index>(i)) > 0 ? mu_pos : mu_neg;
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b)
                s[a][b] += w * (x[i][a] - mu[a]) * (x[i][b] - mu[b]);
    }
    mpq_class trace = 0;
    for (std::size_t j = 0; j < p; ++j)
        trace += s[j][j] / var[j];
    const mpq_class r = mpq_class(ridge) * trace / static_cast<unsigned long>(p);
    std::vector<mpq_class> d(p);
    for (std::size_t j = 0; j < p; ++j) {
        s[j][j] += r * var[j];
        d[j] = mu_pos[j] - mu_neg[j];
    }
    const auto u = solve_exact(std::move(s), std::move(d));
    if (u.empty())
        return {};
    std::vector<double> out(p);
    long double norm = 0;
    for (std::size_t j = 0; j < p; ++j) {
        out[j] = u[j].get_d();
        norm += static_cast<long double>(out[j]) * out[j];
    }
    norm = std::sqrt(norm);
    for (auto& v : out)
        v = static_cast<double>(v / norm);
    return out;
}

/// ||a/|a| - b/|b||| for two direction vectors.
inline double direction_error(const std::vector<double>& a, const std::vector<double>& b) {
    long double na = 0, nb = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        na += static_cast<long double>(a[j]) * a[j];
        nb += static_cast<long double>(b[j]) * b[j];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    long double e = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const long double d = a[j] / na - b[j] / nb;
        e += d * d;
    }
    return static_cast<double>(std::sqrt(e));
}

// ---------------------------------------------------------------------------
// SVM dual reference. The dual with a regularized bias is
//   max sum(alpha) - |G' alpha|^2 / 2,  0 <= alpha_i <= upper_i,
// with rows G_i = y_i [z_i, 1]. Solved by accelerated projected gradient
// with adaptive restart, in long double.

struct DualOracleResult {
    std::vector<long double> alpha;
    long double objective = 0;
    long double violation = 0;
    long iterations = 0;
};

using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LongVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

inline LongMatrix augmented_rows(const Eigen::MatrixXd& z, const Eigen::VectorXd& y) {
    LongMatrix g(z.rows(), z.cols() + 1);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            g(i, j) = static_cast<long double>(y(i)) * z(i, j);
        g(i, z.cols()) = y(i);
    }
    return g;
}

/// Largest projected-gradient magnitude of the dual at `alpha`.
inline long double dual_violation(const LongMatrix& g, const Eigen::VectorXd& upper, const LongVector& alpha) {
    const LongVector grad = LongVector::Ones(g.rows()) - g * (g.transpose() * alpha);
    long double worst = 0;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        long double v;
        if (alpha(i) <= 0)
            v = std::max<long double>(0, grad(i));
        else if (alpha(i) >= upper(i))
            v = std::max<long double>(0, -grad(i));
        else
            v = std::abs(grad(i));
        worst = std::max(worst, v);
    }
    return worst;
}

inline long double dual_value(const LongMatrix& g, const LongVector& alpha) {
    return alpha.sum() - (g.transpose() * alpha).squaredNorm() / 2;
}

inline DualOracleResult svm_dual_oracle(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& upper, long double tol = 1e-9L,
                                        long max_iterations = 2000000) {
    const LongMatrix g = augmented_rows(z, y);
    const Eigen::Index n = g.rows();

    // Lipschitz constant of the gradient: largest eigenvalue of G'G by power iteration.
    const LongMatrix gram = g.transpose() * g;
    LongVector v = LongVector::Ones(gram.rows());
    long double lambda = 0;
    for (int it = 0; it < 500; ++it) {
        const LongVector next = gram * v;
        const long double norm = next.norm();
        if (norm == 0)
            break;
        lambda = norm / v.norm();
        v = next / norm;
    }
    const long double step = 1 / (lambda * 1.05L + 1e-12L);

    auto project = [&](LongVector a) {
        for (Eigen::Index i = 0; i < n; ++i)
            a(i) = std::clamp<long double>(a(i), 0, upper(i));
        return a;
    };

    LongVector alpha = LongVector::Zero(n), prev = alpha, point = alpha;
    long double t = 1;
    DualOracleResult out;
    for (long it = 1; it <= max_iterations; ++it) {
        const LongVector grad = LongVector::Ones(n) - g * (g.transpose() * point);
        prev = alpha;
        alpha = project(point + step * grad);
        // Restart the momentum when it stops pointing uphill.
        if ((alpha - prev).dot(grad) < 0) {
            t = 1;
            point = alpha;
        } else {
            const long double t_next = (1 + std::sqrt(1 + 4 * t * t)) / 2;
            point = alpha + ((t - 1) / t_next) * (alpha - prev);
            t = t_next;
        }
        out.iterations = it;
        if (it % 50 == 0 && dual_violation(g, upper, alpha) <= tol)
            break;
    }
    out.alpha.assign(alpha.data(), alpha.data() + n);
    out.objective = dual_value(g, alpha);
    out.violation = dual_violation(g, upper, alpha);
    return out;
}

// ---------------------------------------------------------------------------
// Findings

/// Non-Other findings with distinct (tool, category, file, line).
inline std::size_t distinct_categorized(const std::vector<FindingsReport>& reports) {
    std::set<std::tuple<std::string, int, std::string, std::size_t>> keys;
    for (const auto& r : reports)
        for (const auto& f : r.findings)
            if (f.category != FindingCategory::Other)
                keys.emplace(f.tool, static_cast<int>(f.category), f.file, f.line);
    return keys.size();
}

// ---------------------------------------------------------------------------
// Source mutations

enum class Region { Code, LineComment, BlockComment, String, Char };

/// Region of every byte of `text`. Directive lines are tagged through `directive`.
inline std::vector<Region> classify_regions(std::string_view text, std::vector<bool>* directive = nullptr) {
    std::vector<Region> out(text.size(), Region::Code);
    if (directive)
        directive->assign(text.size(), false);
    Region state = Region::Code;
    bool in_directive = false, line_start = true, skip = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const char next = i + 1 < text.size() ? text[i + 1] : '\0';
        switch (state) {
        case Region::Code:
            if (line_start && c == '#')
                in_directive = true;
            if (c == '/' && next == '/') {
                state = out[i] = Region::LineComment;
            } else if (c == '/' && next == '*') {
                state = out[i] = Region::BlockComment;
                skip = true;
            } else if (c == '"') {
                state = Region::String;
            } else if (c == '\'') {
                state = Region::Char;
            }
            break;
        case Region::LineComment:
            out[i] = c == '\n' ? Region::Code : Region::LineComment;
            if (c == '\n')
                state = Region::Code;
            break;
        case Region::BlockComment:
            out[i] = Region::BlockComment;
            if (c == '*' && next == '/') {
                state = Region::Code;
                skip = true;
            }
            break;
        case Region::String:
        case Region::Char: {
            const char quote = state == Region::String ? '"' : '\'';
            if (c == '\\' && next != '\0') {
                out[i] = state;
                skip = true;
            } else if (c == quote) {
                state = Region::Code;
            } else {
                out[i] = state;
            }
            break;
        }
        }
        if (directive)
            (*directive)[i] = in_directive;
        if (skip) {
            skip = false;
            ++i;
            out[i] = out[i - 1];
            if (directive)
                (*directive)[i] = in_directive;
            continue;
        }
        if (c == '\n') {
            in_directive = false;
            line_start = true;
        } else if (c != ' ' && c != '\t') {
            line_start = false;
        }
    }
    return out;
}

/// Adds block comments after statements and comment-only lines before code lines.
inline std::string mutate_comments(std::string_view text) {
    std::vector<bool> directive;
    const auto region = classify_regions(text, &directive);
    std::string out;
    bool at_line_start = true;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (at_line_start && region[i] == Region::Code && !directive[i])
            out += "// while (x) { if (y) strcpy(a, b); }\n";
        at_line_start = false;
        out += text[i];
        if (text[i] == ';' && region[i] == Region::Code && !directive[i])
            out += " /* if (c) { for (;;) malloc(1); } */";
        if (text[i] == '\n')
            at_line_start = true;
    }
    out += "\n/* if (tail) { do { gets(b); } while (1); } */\n";
    return out;
}

/// Widens every code-region space, inserts blank lines and switches to CRLF.
inline std::string mutate_whitespace(std::string_view text) {
    const auto region = classify_regions(text);
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == ' ' && region[i] == Region::Code)
            out += " \t  ";
        else if (c == '\n' && region[i] == Region::Code)
            out += "\r\n\r\n   \t\r\n";
        else if (c == '\n')
            out += "\r\n";
        else
            out += c;
    }
    return out;
}

/// Replaces every string literal body with branchy, call-laden text.
inline std::string mutate_strings(std::string_view text) {
    const auto region = classify_regions(text);
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (region[i] == Region::String) {
            if (i == 0 || region[i - 1] != Region::String)
                out += "if (s) { while (t) { gets(u); } } /* // \\\" ? :";
            continue;
        }
        out += text[i];
    }
    return out;
}

} // namespace vulnscore::testing
