#include "unica/layers.hpp"

#include <cmath>

#include "unica/errors.hpp"

namespace unica {

Tensor init_weight(Rng& rng, std::size_t fan_in, std::size_t fan_out, double scale) {
    Tensor w({fan_in, fan_out});
    const double sd = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (double& x : w.data()) x = rng.normal(0.0, sd);
    return w;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool bias, double scale)
    : W(name + ".W", init_weight(rng, in, out, scale)), b(name + ".b", Tensor({out})), has_bias(bias) {}

Var Linear::operator()(Tape& t, Var x) {
    if (x.value().cols() != in())
        throw DimensionError(W.name + ": expected width " + std::to_string(in()) + ", got " +
                             shape_str(x.value().shape()));
    return has_bias ? ops::linear(x, t.param(W), t.param(b)) : ops::linear(x, t.param(W));
}

void Linear::collect(std::vector<Parameter*>& out) {
    out.push_back(&W);
    if (has_bias) out.push_back(&b);
}

LayerNorm::LayerNorm(const std::string& name, std::size_t dim)
    : gamma(name + ".gamma", Tensor({dim}, 1.0)), beta(name + ".beta", Tensor({dim})) {}

Var LayerNorm::operator()(Tape& t, Var x) { return ops::layer_norm_rows(x, t.param(gamma), t.param(beta)); }

void LayerNorm::collect(std::vector<Parameter*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

MultiHeadAttention::MultiHeadAttention(const std::string& name, std::size_t dim, std::size_t heads_, Rng& rng)
    : q(name + ".q", dim, dim, rng),
      k(name + ".k", dim, dim, rng),
      v(name + ".v", dim, dim, rng),
      o(name + ".o", dim, dim, rng),
      heads(heads_) {
    if (heads == 0 || dim % heads != 0)
        throw ConfigError(name + ": width " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) + " heads");
}

Var MultiHeadAttention::operator()(Tape& t, Var x, std::vector<Tensor>* weights) {
    const std::size_t d = q.in();
    const std::size_t dh = d / heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    Var Q = q(t, x), K = k(t, x), V = v(t, x);
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = heads == 1 ? Q : ops::slice_cols(Q, h * dh, dh);
        Var kh = heads == 1 ? K : ops::slice_cols(K, h * dh, dh);
        Var vh = heads == 1 ? V : ops::slice_cols(V, h * dh, dh);
        Var a = ops::softmax_rows(ops::scale(ops::matmul_nt(qh, kh), inv));
        if (weights) weights->push_back(a.value());
        outs.push_back(ops::matmul(a, vh));
    }
    return o(t, heads == 1 ? outs[0] : ops::concat_cols(outs));
}

void MultiHeadAttention::collect(std::vector<Parameter*>& out) {
    q.collect(out);
    k.collect(out);
    v.collect(out);
    o.collect(out);
}

}  // namespace unica
