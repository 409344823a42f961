#include "unica/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "unica/errors.hpp"

namespace unica {
namespace {

// C[m, n] += A[m, k] * B[k, n]
void acc_ab(double* c, const double* a, const double* b, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// C[m, n] += A[m, k] * B[n, k]^T
void acc_abt(double* c, const double* a, const double* b, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            c[i * n + j] += s;
        }
    }
}

// C[k, n] += A[m, k]^T * B[m, n]
void acc_atb(double* c, const double* a, const double* b, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            double* cp = c + p * n;
            for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

Tape& tape_of(Var a) {
    if (!a.valid()) throw ContractError("ops: invalid Var");
    return *a.tape();
}

void same_tape(Var a, Var b) {
    if (a.tape() != b.tape()) throw ContractError("ops: operands recorded on different tapes");
}

void same_size(const Tensor& a, const Tensor& b, const char* op) {
    if (a.size() != b.size()) {
        throw DimensionError(std::string(op) + ": size mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

Shape matrix_shape(std::size_t r, std::size_t c) { return Shape{r, c}; }

template <typename F, typename D>
Var unary(Var x, F f, D dfdx_from_xy) {
    auto& t = tape_of(x);
    const Tensor& xv = x.value();
    Tensor y(xv.shape());
    auto yd = y.data();
    auto xd = xv.data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = f(xd[i]);
    const auto xi = x.id();
    return t.record(std::move(y), {x}, [xi, dfdx_from_xy](Tape& tp, const Tensor& g) {
        if (!tp.requires_grad(xi)) return;
        const auto xd = tp.value(xi).data();
        auto gx = tp.grad(xi).data();
        auto gd = g.data();
        for (std::size_t i = 0; i < gd.size(); ++i) gx[i] += gd[i] * dfdx_from_xy(xd[i]);
    });
}

}  // namespace

namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols();
    if (b.rank() != 2 && !(b.rank() == 1 && k == 1)) {
        throw DimensionError("matmul: right operand must be a matrix, got " + shape_str(b.shape()));
    }
    const std::size_t kb = b.rank() == 2 ? b.dim(0) : 1;
    const std::size_t n = b.cols();
    if (k != kb) {
        throw DimensionError("matmul: inner dimensions differ (" + shape_str(a.shape()) + " x " + shape_str(b.shape()) + ")");
    }
    Tensor c(matrix_shape(m, n));
    acc_ab(c.data().data(), a.data().data(), b.data().data(), m, k, n);
    return c;
}

Tensor softmax(const Tensor& v) {
    if (v.empty()) throw DimensionError("softmax: empty input");
    Tensor y(v.shape());
    const std::size_t r = v.rows(), c = v.cols();
    if (c == 0) throw DimensionError("softmax: empty rows");
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = v.data().data() + i * c;
        double* o = y.data().data() + i * c;
        double mx = x[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            o[j] = std::exp(x[j] - mx);
            s += o[j];
        }
        for (std::size_t j = 0; j < c; ++j) o[j] /= s;
    }
    return y;
}

Tensor layer_norm(const Tensor& v, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t r = v.rows(), c = v.cols();
    if (gamma.size() != c || beta.size() != c) throw DimensionError("layer_norm: gamma/beta width mismatch");
    Tensor y(v.shape());
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = v.data().data() + i * c;
        double* o = y.data().data() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += x[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) o[j] = gamma[j] * ((x[j] - mu) * inv) + beta[j];
    }
    return y;
}

double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

}  // namespace kernels

namespace ops {

Var add(Var a, Var b) {
    same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    same_size(av, bv, "add");
    Tensor y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
    const auto ai = a.id(), bi = b.id();
    return tape_of(a).record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
        for (auto id : {ai, bi}) {
            if (!t.requires_grad(id)) continue;
            auto gx = t.grad(id).data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
        }
    });
}

Var sub(Var a, Var b) {
    same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    same_size(av, bv, "sub");
    Tensor y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
    const auto ai = a.id(), bi = b.id();
    return tape_of(a).record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
        if (t.requires_grad(ai)) {
            auto gx = t.grad(ai).data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
        }
        if (t.requires_grad(bi)) {
            auto gx = t.grad(bi).data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    same_size(av, bv, "mul");
    Tensor y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    const auto ai = a.id(), bi = b.id();
    return tape_of(a).record(std::move(y), {a, b}, [ai, bi](Tape& t, const Tensor& g) {
        if (t.requires_grad(ai)) {
            const Tensor& bv = t.value(bi);
            auto gx = t.grad(ai).data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * bv[i];
        }
        if (t.requires_grad(bi)) {
            const Tensor& av = t.value(ai);
            auto gx = t.grad(bi).data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * av[i];
        }
    });
}

Var scale(Var a, double s) {
    const Tensor& av = a.value();
    Tensor y(av.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * s;
    const auto ai = a.id();
    return tape_of(a).record(std::move(y), {a}, [ai, s](Tape& t, const Tensor& g) {
        auto gx = t.grad(ai).data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * s;
    });
}

Var add_bias(Var x, Var b) {
    same_tape(x, b);
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    const std::size_t r = xv.rows(), c = xv.cols();
    if (bv.size() != c) throw DimensionError("add_bias: bias has " + std::to_string(bv.size()) + " values for width " + std::to_string(c));
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = xv[i * c + j] + bv[j];
    const auto xi = x.id(), bi = b.id();
    return tape_of(x).record(std::move(y), {x, b}, [xi, bi, r, c](Tape& t, const Tensor& g) {
        if (t.requires_grad(xi)) {
            auto gx = t.grad(xi).data();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
        }
        if (t.requires_grad(bi)) {
            auto gb = t.grad(bi).data();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
    });
}

Var matmul(Var a, Var b) {
    same_tape(a, b);
    Tensor y = kernels::matmul(a.value(), b.value());
    const std::size_t m = a.value().rows(), k = a.value().cols(), n = b.value().cols();
    const auto ai = a.id(), bi = b.id();
    return tape_of(a).record(std::move(y), {a, b}, [ai, bi, m, k, n](Tape& t, const Tensor& g) {
        if (t.requires_grad(ai)) acc_abt(t.grad(ai).data().data(), g.data().data(), t.value(bi).data().data(), m, n, k);
        if (t.requires_grad(bi)) acc_atb(t.grad(bi).data().data(), t.value(ai).data().data(), g.data().data(), m, k, n);
    });
}

Var matmul_nt(Var a, Var b) {
    same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
    if (bv.cols() != k) throw DimensionError("matmul_nt: inner dimensions differ (" + shape_str(av.shape()) + " x " + shape_str(bv.shape()) + "^T)");
    Tensor y(matrix_shape(m, n));
    acc_abt(y.data().data(), av.data().data(), bv.data().data(), m, k, n);
    const auto ai = a.id(), bi = b.id();
    return tape_of(a).record(std::move(y), {a, b}, [ai, bi, m, k, n](Tape& t, const Tensor& g) {
        if (t.requires_grad(ai)) acc_ab(t.grad(ai).data().data(), g.data().data(), t.value(bi).data().data(), m, n, k);
        if (t.requires_grad(bi)) acc_atb(t.grad(bi).data().data(), g.data().data(), t.value(ai).data().data(), m, n, k);
    });
}

Var linear(Var x, Var w, Var b) {
    same_tape(x, w);
    same_tape(x, b);
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    const std::size_t m = xv.rows(), k = xv.cols();
    if (wv.rank() != 2 || wv.dim(0) != k) {
        throw DimensionError("linear: input width " + std::to_string(k) + " vs weight " + shape_str(wv.shape()));
    }
    const std::size_t n = wv.dim(1);
    if (bv.size() != n) throw DimensionError("linear: bias width mismatch");
    Tensor y(matrix_shape(m, n));
    double* yd = y.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) yd[i * n + j] = bv[j];
    acc_ab(yd, xv.data().data(), wv.data().data(), m, k, n);
    const auto xi = x.id(), wi = w.id(), bi = b.id();
    return tape_of(x).record(std::move(y), {x, w, b}, [xi, wi, bi, m, k, n](Tape& t, const Tensor& g) {
        if (t.requires_grad(xi)) acc_abt(t.grad(xi).data().data(), g.data().data(), t.value(wi).data().data(), m, n, k);
        if (t.requires_grad(wi)) acc_atb(t.grad(wi).data().data(), t.value(xi).data().data(), g.data().data(), m, k, n);
        if (t.requires_grad(bi)) {
            auto gb = t.grad(bi).data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
    });
}

Var linear(Var x, Var w) { return matmul(x, w); }

Var transpose(Var a) {
    const Tensor& av = a.value();
    const std::size_t r = av.rows(), c = av.cols();
    Tensor y(matrix_shape(c, r));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[j * r + i] = av[i * c + j];
    const auto ai = a.id();
    return tape_of(a).record(std::move(y), {a}, [ai, r, c](Tape& t, const Tensor& g) {
        auto gx = t.grad(ai).data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    });
}

Var elu(Var x) {
    return unary(x, kernels::elu, [](double v) { return v >= 0.0 ? 1.0 : std::exp(v); });
}

Var sigmoid(Var x) {
    return unary(x, kernels::sigmoid, [](double v) {
        const double s = kernels::sigmoid(v);
        return s * (1.0 - s);
    });
}

Var silu(Var x) {
    return unary(x, kernels::silu, [](double v) {
        const double s = kernels::sigmoid(v);
        return s + v * s * (1.0 - s);
    });
}

Var softmax_rows(Var x) {
    Tensor y = kernels::softmax(x.value());
    const std::size_t r = y.rows(), c = y.cols();
    const auto xi = x.id();
    auto& t = tape_of(x);
    const auto yi = static_cast<std::uint32_t>(t.size());  // id of the node recorded below
    return t.record(std::move(y), {x}, [xi, yi, r, c](Tape& tp, const Tensor& g) {
        const Tensor& yv = tp.value(yi);
        auto gx = tp.grad(xi).data();
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * yv[i * c + j];
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += yv[i * c + j] * (g[i * c + j] - dot);
        }
    });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
    same_tape(x, gamma);
    same_tape(x, beta);
    const Tensor& xv = x.value();
    const std::size_t r = xv.rows(), c = xv.cols();
    if (gamma.value().size() != c || beta.value().size() != c) throw DimensionError("layer_norm: gamma/beta width mismatch");
    Tensor xhat(xv.shape());
    std::vector<double> inv(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* xr = xv.data().data() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += xr[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(c);
        inv[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) xhat[i * c + j] = (xr[j] - mu) * inv[i];
    }
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = gv[j] * xhat[i * c + j] + bv[j];
    const auto xi = x.id(), gi = gamma.id(), bi = beta.id();
    return tape_of(x).record(std::move(y), {x, gamma, beta},
                             [xi, gi, bi, r, c, xhat = std::move(xhat), inv = std::move(inv)](Tape& t, const Tensor& g) {
        if (t.requires_grad(gi)) {
            auto gg = t.grad(gi).data();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat[i * c + j];
        }
        if (t.requires_grad(bi)) {
            auto gb = t.grad(bi).data();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
        if (t.requires_grad(xi)) {
            const Tensor& gv = t.value(gi);
            auto gx = t.grad(xi).data();
            const double nc = static_cast<double>(c);
            for (std::size_t i = 0; i < r; ++i) {
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double dh = g[i * c + j] * gv[j];
                    m1 += dh;
                    m2 += dh * xhat[i * c + j];
                }
                m1 /= nc;
                m2 /= nc;
                for (std::size_t j = 0; j < c; ++j) {
                    const double dh = g[i * c + j] * gv[j];
                    gx[i * c + j] += inv[i] * (dh - m1 - xhat[i * c + j] * m2);
                }
            }
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    auto& t = tape_of(parts.front());
    const std::size_t r = parts.front().value().rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        same_tape(parts.front(), p);
        if (p.value().rows() != r) throw DimensionError("concat_cols: row counts differ");
        widths.push_back(p.value().cols());
        total += widths.back();
    }
    Tensor y(matrix_shape(r, total));
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& pv = parts[k].value();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) y[i * total + off + j] = pv[i * widths[k] + j];
        off += widths[k];
    }
    std::vector<std::uint32_t> ids;
    for (const auto& p : parts) ids.push_back(p.id());
    return t.record(std::move(y), parts, [ids, widths, r, total](Tape& tp, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (tp.requires_grad(ids[k])) {
                auto gx = tp.grad(ids[k]).data();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < widths[k]; ++j) gx[i * widths[k] + j] += g[i * total + off + j];
            }
            off += widths[k];
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    auto& t = tape_of(parts.front());
    const std::size_t c = parts.front().value().cols();
    std::size_t rows = 0;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
        same_tape(parts.front(), p);
        if (p.value().cols() != c) throw DimensionError("concat_rows: column counts differ");
        rows += p.value().rows();
        sizes.push_back(p.value().size());
    }
    std::vector<double> data;
    data.reserve(rows * c);
    for (const auto& p : parts) data.insert(data.end(), p.value().vec().begin(), p.value().vec().end());
    Tensor y(matrix_shape(rows, c), std::move(data));
    std::vector<std::uint32_t> ids;
    for (const auto& p : parts) ids.push_back(p.id());
    return t.record(std::move(y), parts, [ids, sizes](Tape& tp, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (tp.requires_grad(ids[k])) {
                auto gx = tp.grad(ids[k]).data();
                for (std::size_t i = 0; i < sizes[k]; ++i) gx[i] += g[off + i];
            }
            off += sizes[k];
        }
    });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
    const Tensor& xv = x.value();
    const std::size_t r = xv.rows(), c = xv.cols();
    if (begin + count > r) throw DimensionError("slice_rows: range out of bounds");
    std::vector<double> data(xv.vec().begin() + static_cast<std::ptrdiff_t>(begin * c),
                             xv.vec().begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
    Tensor y(matrix_shape(count, c), std::move(data));
    const auto xi = x.id();
    return tape_of(x).record(std::move(y), {x}, [xi, begin, c](Tape& t, const Tensor& g) {
        auto gx = t.grad(xi).data();
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin * c + i] += g[i];
    });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
    const Tensor& xv = x.value();
    const std::size_t r = xv.rows(), c = xv.cols();
    if (begin + count > c) throw DimensionError("slice_cols: range out of bounds");
    Tensor y(matrix_shape(r, count));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j) y[i * count + j] = xv[i * c + begin + j];
    const auto xi = x.id();
    return tape_of(x).record(std::move(y), {x}, [xi, begin, count, r, c](Tape& t, const Tensor& g) {
        auto gx = t.grad(xi).data();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j) gx[i * c + begin + j] += g[i * count + j];
    });
}

Var reshape(Var x, Shape shape) {
    Tensor y = x.value().reshaped(std::move(shape));
    const auto xi = x.id();
    return tape_of(x).record(std::move(y), {x}, [xi](Tape& t, const Tensor& g) {
        auto gx = t.grad(xi).data();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    });
}

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    const auto xi = x.id();
    return tape_of(x).record(Tensor::scalar(s), {x}, [xi](Tape& t, const Tensor& g) {
        auto gx = t.grad(xi).data();
        for (auto& v : gx) v += g[0];
    });
}

Var mean(Var x) {
    const double n = static_cast<double>(x.value().size());
    if (n == 0) throw DimensionError("mean: empty input");
    return scale(sum(x), 1.0 / n);
}

Var mean_rows(Var x) {
    const Tensor& xv = x.value();
    const std::size_t r = xv.rows(), c = xv.cols();
    if (r == 0) throw DimensionError("mean_rows: no rows");
    Tensor y(matrix_shape(1, c));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[j] += xv[i * c + j];
    for (std::size_t j = 0; j < c; ++j) y[j] /= static_cast<double>(r);
    const auto xi = x.id();
    return tape_of(x).record(std::move(y), {x}, [xi, r, c](Tape& t, const Tensor& g) {
        auto gx = t.grad(xi).data();
        const double inv = 1.0 / static_cast<double>(r);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j] * inv;
    });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
    const Tensor& tv = table.value();
    if (tv.rank() != 2) throw DimensionError("gather_rows: table must be a matrix");
    const std::size_t vocab = tv.dim(0), c = tv.dim(1);
    Tensor y(matrix_shape(ids.size(), c));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= vocab) {
            throw DataError("gather_rows: id " + std::to_string(ids[i]) + " outside vocabulary of size " + std::to_string(vocab));
        }
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = tv[ids[i] * c + j];
    }
    const auto ti = table.id();
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    return tape_of(table).record(std::move(y), {table}, [ti, c, idx = std::move(idx)](Tape& t, const Tensor& g) {
        auto gt = t.grad(ti).data();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) gt[idx[i] * c + j] += g[i * c + j];
    });
}

Var standardize_columns(Var x, std::size_t prefix_rows, double floor) {
    const Tensor& xv = x.value();
    const std::size_t r = xv.rows(), c = xv.cols();
    if (prefix_rows == 0 || prefix_rows > r) throw DimensionError("standardize_columns: invalid prefix length");
    std::vector<double> mu(c, 0.0), sigma(c, 0.0);
    std::vector<bool> floored(c, false);
    const double np = static_cast<double>(prefix_rows);
    for (std::size_t j = 0; j < c; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < prefix_rows; ++i) m += xv[i * c + j];
        m /= np;
        double var = 0.0;
        for (std::size_t i = 0; i < prefix_rows; ++i) var += (xv[i * c + j] - m) * (xv[i * c + j] - m);
        var /= np;
        const double sd = std::sqrt(var);
        mu[j] = m;
        floored[j] = !(sd > floor);
        sigma[j] = floored[j] ? floor : sd;
    }
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = (xv[i * c + j] - mu[j]) / sigma[j];
    const auto xi = x.id();
    auto& t = tape_of(x);
    const auto yi = static_cast<std::uint32_t>(t.size());
    return t.record(std::move(y), {x},
                    [xi, yi, r, c, prefix_rows, sigma = std::move(sigma), floored = std::move(floored)](Tape& tp, const Tensor& g) {
        const Tensor& z = tp.value(yi);
        auto gx = tp.grad(xi).data();
        const double np = static_cast<double>(prefix_rows);
        for (std::size_t j = 0; j < c; ++j) {
            double gsum = 0.0, gz = 0.0;
            for (std::size_t i = 0; i < r; ++i) {
                gsum += g[i * c + j];
                gz += g[i * c + j] * z[i * c + j];
            }
            const double s = sigma[j];
            const double dmu = -gsum / s;
            const double ds = floored[j] ? 0.0 : -gz / s;
            for (std::size_t i = 0; i < r; ++i) gx[i * c + j] += g[i * c + j] / s;
            for (std::size_t i = 0; i < prefix_rows; ++i) {
                // d sigma / d x_i = z_i / n over the prefix (mean-centred).
                gx[i * c + j] += dmu / np + ds * z[i * c + j] / np;
            }
        }
    });
}

Var patchify(Var x, const Tensor& mask, std::size_t patch) {
    if (patch == 0) throw ContractError("patchify: patch length must be positive");
    const Tensor& xv = x.value();
    const std::size_t n = xv.rows(), c = xv.cols();
    if (n == 0) throw DimensionError("patchify: empty series");
    if (!mask.empty() && mask.size() != n * c) throw DimensionError("patchify: mask shape mismatch");
    const std::size_t tokens = (n + patch - 1) / patch;
    const std::size_t pad = tokens * patch - n;
    const std::size_t w = 2 * patch;
    Tensor y(matrix_shape(tokens * c, w));
    for (std::size_t p = 0; p < tokens; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            double* row = y.data().data() + (p * c + ch) * w;
            for (std::size_t k = 0; k < patch; ++k) {
                const std::size_t pos = p * patch + k;
                if (pos < pad) continue;
                const std::size_t src = pos - pad;
                row[k] = xv[src * c + ch];
                row[patch + k] = mask.empty() ? 1.0 : mask[src * c + ch];
            }
        }
    }
    const auto xi = x.id();
    return tape_of(x).record(std::move(y), {x}, [xi, tokens, pad, patch, c, w](Tape& t, const Tensor& g) {
        auto gx = t.grad(xi).data();
        for (std::size_t p = 0; p < tokens; ++p)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t k = 0; k < patch; ++k) {
                    const std::size_t pos = p * patch + k;
                    if (pos < pad) continue;
                    gx[(pos - pad) * c + ch] += g[(p * c + ch) * w + k];
                }
    });
}

Var pool_channels(Var w, Var v) {
    same_tape(w, v);
    const Tensor& wv = w.value();
    const Tensor& vv = v.value();
    const std::size_t P = wv.rows(), M = wv.cols(), d = vv.cols();
    if (vv.rows() != P * M) throw DimensionError("pool_channels: values must have P*M rows");
    Tensor y(matrix_shape(P, d));
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t m = 0; m < M; ++m) {
            const double a = wv[p * M + m];
            const double* vr = vv.data().data() + (p * M + m) * d;
            for (std::size_t j = 0; j < d; ++j) y[p * d + j] += a * vr[j];
        }
    const auto wi = w.id(), vi = v.id();
    return tape_of(w).record(std::move(y), {w, v}, [wi, vi, P, M, d](Tape& t, const Tensor& g) {
        if (t.requires_grad(wi)) {
            const Tensor& vv = t.value(vi);
            auto gw = t.grad(wi).data();
            for (std::size_t p = 0; p < P; ++p)
                for (std::size_t m = 0; m < M; ++m) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < d; ++j) s += g[p * d + j] * vv[(p * M + m) * d + j];
                    gw[p * M + m] += s;
                }
        }
        if (t.requires_grad(vi)) {
            const Tensor& wv = t.value(wi);
            auto gv = t.grad(vi).data();
            for (std::size_t p = 0; p < P; ++p)
                for (std::size_t m = 0; m < M; ++m)
                    for (std::size_t j = 0; j < d; ++j) gv[(p * M + m) * d + j] += wv[p * M + m] * g[p * d + j];
        }
    });
}

Var quantile_loss(Var pred, std::span<const double> y, std::span<const double> levels) {
    const Tensor& pv = pred.value();
    const std::size_t H = y.size(), K = levels.size();
    if (pv.size() != H * K) {
        throw DimensionError("quantile_loss: prediction " + shape_str(pv.shape()) + " vs " + std::to_string(H) + "x" + std::to_string(K));
    }
    for (double v : y)
        if (!std::isfinite(v)) throw NumericError("quantile_loss: non-finite target");
    if (!pv.all_finite()) throw NumericError("quantile_loss: non-finite prediction");
    double total = 0.0;
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t k = 0; k < K; ++k) {
            const double q = pv[h * K + k];
            const double ind = y[h] < q ? 1.0 : 0.0;
            total += (levels[k] - ind) * (y[h] - q);
        }
    const double inv = 1.0 / static_cast<double>(H * K);
    std::vector<double> yc(y.begin(), y.end()), lc(levels.begin(), levels.end());
    const auto pi = pred.id();
    return tape_of(pred).record(Tensor::scalar(total * inv), {pred},
                                [pi, yc = std::move(yc), lc = std::move(lc), inv](Tape& t, const Tensor& g) {
        const Tensor& pv = t.value(pi);
        auto gp = t.grad(pi).data();
        const std::size_t K = lc.size();
        for (std::size_t h = 0; h < yc.size(); ++h)
            for (std::size_t k = 0; k < K; ++k) {
                const double ind = yc[h] < pv[h * K + k] ? 1.0 : 0.0;
                gp[h * K + k] += -(lc[k] - ind) * inv * g[0];
            }
    });
}

Var huber_loss(Var pred, std::span<const double> y, double delta) {
    const Tensor& pv = pred.value();
    if (pv.size() != y.size()) throw DimensionError("huber_loss: size mismatch");
    if (!pv.all_finite()) throw NumericError("huber_loss: non-finite prediction");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = pv[i] - y[i];
        const double a = std::abs(e);
        total += a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
    }
    const double inv = 1.0 / static_cast<double>(y.size());
    std::vector<double> yc(y.begin(), y.end());
    const auto pi = pred.id();
    return tape_of(pred).record(Tensor::scalar(total * inv), {pred}, [pi, yc = std::move(yc), inv, delta](Tape& t, const Tensor& g) {
        const Tensor& pv = t.value(pi);
        auto gp = t.grad(pi).data();
        for (std::size_t i = 0; i < yc.size(); ++i) {
            const double e = pv[i] - yc[i];
            const double d = std::abs(e) <= delta ? e : (e > 0 ? delta : -delta);
            gp[i] += d * inv * g[0];
        }
    });
}

}  // namespace ops
}  // namespace unica
