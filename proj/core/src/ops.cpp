#include "lsp/ops.hpp"

#include <algorithm>
#include <cmath>

namespace lsp {

namespace {

void ensure_finite(const std::vector<double>& v, const char* op) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string(op) + ": non-finite value in result");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

bool is_scalar(const Tensor& t) { return t.rank() == 0; }

// Broadcast classification for add/sub: 0 = same shape, 1 = b is [k] against
// a [n,k], 2 = b is scalar.
int broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return 0;
    if (is_scalar(b)) return 2;
    if (a.rank() == 2 && b.rank() == 1 && a.cols() == b.shape()[0]) return 1;
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b.shape()) + " onto " +
                     shape_str(a.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: expects rank-2 tensors, got " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dims disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    std::vector<double> out(n * m, 0.0);
    auto av = a.data();
    auto bv = b.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k2 = 0; k2 < k; ++k2) {
            const double x = av[i * k + k2];
            if (x == 0.0) continue;
            const double* brow = bv.data() + k2 * m;
            double* orow = out.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += x * brow[j];
        }
    ensure_finite(out, "matmul");
    Tensor res(Shape{n, m}, std::move(out));
    if (GradTape* tape = GradTape::current(); tape && (tape->tracks(a) || tape->tracks(b))) {
        const bool ta = tape->tracks(a), tb = tape->tracks(b);
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            if (ta) {
                auto& ga = acc.get(a);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k2 = 0; k2 < k; ++k2) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < m; ++j)
                            s += g[i * m + j] * b.data()[k2 * m + j];
                        ga[i * k + k2] += s;
                    }
            }
            if (tb) {
                auto& gb = acc.get(b);
                for (std::size_t k2 = 0; k2 < k; ++k2)
                    for (std::size_t j = 0; j < m; ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < n; ++i)
                            s += a.data()[i * k + k2] * g[i * m + j];
                        gb[k2 * m + j] += s;
                    }
            }
        });
    }
    return res;
}

namespace {

Tensor add_like(const Tensor& a, const Tensor& b, double sign, const char* op) {
    const int mode = broadcast_mode(a, b, op);
    std::vector<double> out(a.data().begin(), a.data().end());
    auto bv = b.data();
    if (mode == 0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * bv[i];
    } else if (mode == 2) {
        for (double& x : out) x += sign * bv[0];
    } else {
        const std::size_t k = a.cols();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * bv[i % k];
    }
    ensure_finite(out, op);
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && (tape->tracks(a) || tape->tracks(b))) {
        const bool ta = tape->tracks(a), tb = tape->tracks(b);
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            if (ta) {
                auto& ga = acc.get(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (tb) {
                auto& gb = acc.get(b);
                if (mode == 0) {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
                } else if (mode == 2) {
                    double s = 0.0;
                    for (double x : g) s += x;
                    gb[0] += sign * s;
                } else {
                    const std::size_t k = gb.size();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i % k] += sign * g[i];
                }
            }
        });
    }
    return res;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_like(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_like(a, b, -1.0, "sub"); }

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
    ensure_finite(out, "scale");
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }
    return res;
}

Tensor offset(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + c;
    ensure_finite(out, "offset");
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return res;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const bool bscalar = is_scalar(b);
    if (!bscalar) require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * (bscalar ? b[0] : b[i]);
    ensure_finite(out, "mul");
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && (tape->tracks(a) || tape->tracks(b))) {
        const bool ta = tape->tracks(a), tb = tape->tracks(b);
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            if (ta) {
                auto& ga = acc.get(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (bscalar ? b[0] : b[i]);
            }
            if (tb) {
                auto& gb = acc.get(b);
                if (bscalar) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * a[i];
                    gb[0] += s;
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
                }
            }
        });
    }
    return res;
}

Tensor divide(const Tensor& a, const Tensor& b) {
    const bool bscalar = is_scalar(b);
    if (!bscalar) require_same_shape(a, b, "divide");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / (bscalar ? b[0] : b[i]);
    ensure_finite(out, "divide");
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && (tape->tracks(a) || tape->tracks(b))) {
        const bool ta = tape->tracks(a), tb = tape->tracks(b);
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            if (ta) {
                auto& ga = acc.get(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (bscalar ? b[0] : b[i]);
            }
            if (tb) {
                auto& gb = acc.get(b);
                if (bscalar) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * a[i];
                    gb[0] -= s / (b[0] * b[0]);
                } else {
                    for (std::size_t i = 0; i < g.size(); ++i)
                        gb[i] -= g[i] * a[i] / (b[i] * b[i]);
                }
            }
        });
    }
    return res;
}

namespace {

template <typename F, typename DF>
Tensor elementwise(const Tensor& a, const char* op, F f, DF df) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
    ensure_finite(out, op);
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(a[i]);
        });
    }
    return res;
}

}  // namespace

Tensor relu(const Tensor& a) {
    return elementwise(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& a) {
    for (double x : a.data())
        if (!(x > 0.0)) throw NumericError("log: non-positive input");
    return elementwise(
        a, "log", [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
    return elementwise(
        a, "exp", [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Tensor square(const Tensor& a) {
    return elementwise(
        a, "square", [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
    return elementwise(
        a, "abs", [](double x) { return std::fabs(x); },
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

namespace {

Tensor reduce(const Tensor& a, const char* op, double denom) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    s /= denom;
    if (!std::isfinite(s)) throw NumericError(std::string(op) + ": non-finite value in result");
    Tensor res = Tensor::scalar(s);
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            const double gv = g[0] / denom;
            for (double& x : ga) x += gv;
        });
    }
    return res;
}

}  // namespace

Tensor sum(const Tensor& a) { return reduce(a, "sum", 1.0); }
Tensor mean(const Tensor& a) { return reduce(a, "mean", static_cast<double>(a.size())); }

Tensor l2_norm(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    const double r = std::sqrt(s);
    if (!std::isfinite(r)) throw NumericError("l2_norm: non-finite value in result");
    Tensor res = Tensor::scalar(r);
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            if (r == 0.0) return;  // subgradient 0 at the origin
            auto& ga = acc.get(a);
            const double gv = g[0] / r;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv * a[i];
        });
    }
    return res;
}

Tensor l2_norm_rows(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("l2_norm_rows: expects rank 2, got " + shape_str(a.shape()));
    const std::size_t n = a.rows(), k = a.cols();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double x = a[i * k + j];
            s += x * x;
        }
        out[i] = std::sqrt(s);
    }
    ensure_finite(out, "l2_norm_rows");
    Tensor res(Shape{n}, std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < n; ++i) {
                if (res[i] == 0.0) continue;
                const double gv = g[i] / res[i];
                for (std::size_t j = 0; j < k; ++j) ga[i * k + j] += gv * a[i * k + j];
            }
        });
    }
    return res;
}

Tensor softmax(const Tensor& a) {
    if (a.rank() != 1 && a.rank() != 2)
        throw ShapeError("softmax: expects rank 1 or 2, got " + shape_str(a.shape()));
    const std::size_t n = a.rank() == 2 ? a.rows() : 1;
    const std::size_t k = a.rank() == 2 ? a.cols() : a.shape()[0];
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = a.data().data() + i * k;
        double m = row[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            out[i * k + j] = std::exp(row[j] - m);
            s += out[i * k + j];
        }
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= s;
    }
    ensure_finite(out, "softmax");
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < k; ++j) dot += g[i * k + j] * res[i * k + j];
                for (std::size_t j = 0; j < k; ++j)
                    ga[i * k + j] += res[i * k + j] * (g[i * k + j] - dot);
            }
        });
    }
    return res;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError("clamp: lo must not exceed hi");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(a[i], lo), hi);
    ensure_finite(out, "clamp");
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (a[i] >= lo && a[i] <= hi) ga[i] += g[i];
        });
    }
    return res;
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> ids) {
    if (a.rank() != 2) throw ShapeError("gather_rows: expects rank 2, got " + shape_str(a.shape()));
    const std::size_t n = a.rows(), k = a.cols();
    std::vector<std::size_t> sel(ids.begin(), ids.end());
    for (std::size_t id : sel)
        if (id >= n) throw ShapeError("gather_rows: row index " + std::to_string(id) +
                                      " out of range for " + shape_str(a.shape()));
    std::vector<double> out(sel.size() * k);
    for (std::size_t i = 0; i < sel.size(); ++i)
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = a[sel[i] * k + j];
    Tensor res(Shape{sel.size(), k}, std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < sel.size(); ++i)
                for (std::size_t j = 0; j < k; ++j) ga[sel[i] * k + j] += g[i * k + j];
        });
    }
    return res;
}

Tensor normalize_rows(const Tensor& a) {
    if (a.rank() != 1 && a.rank() != 2)
        throw ShapeError("normalize_rows: expects rank 1 or 2, got " + shape_str(a.shape()));
    const std::size_t n = a.rank() == 2 ? a.rows() : 1;
    const std::size_t k = a.rank() == 2 ? a.cols() : a.shape()[0];
    std::vector<double> out(a.size());
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += a[i * k + j] * a[i * k + j];
        norms[i] = std::sqrt(s);
        if (norms[i] == 0.0) throw NumericError("normalize_rows: zero-norm row");
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = a[i * k + j] / norms[i];
    }
    ensure_finite(out, "normalize_rows");
    Tensor res(a.shape(), std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < k; ++j) dot += a[i * k + j] * g[i * k + j];
                const double n1 = norms[i];
                const double n3 = n1 * n1 * n1;
                for (std::size_t j = 0; j < k; ++j)
                    ga[i * k + j] += g[i * k + j] / n1 - a[i * k + j] * dot / n3;
            }
        });
    }
    return res;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size())
        throw ShapeError("reshape: cannot reshape " + shape_str(a.shape()) + " to " +
                         shape_str(shape));
    Tensor res(shape, std::vector<double>(a.data().begin(), a.data().end()));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return res;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expects rank 2, got " + shape_str(a.shape()));
    const std::size_t n = a.rows(), k = a.cols();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) out[j * n + i] = a[i * k + j];
    Tensor res(Shape{k, n}, std::move(out));
    if (GradTape* tape = GradTape::current(); tape && tape->tracks(a)) {
        tape->record(res, [=](const std::vector<double>& g, GradAccumulator& acc) {
            auto& ga = acc.get(a);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) ga[i * k + j] += g[j * n + i];
        });
    }
    return res;
}

}  // namespace lsp
