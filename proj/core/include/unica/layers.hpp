#pragma once

#include <string>
#include <vector>

#include "unica/ops.hpp"
#include "unica/rng.hpp"
#include "unica/tape.hpp"
#include "unica/tensor.hpp"

namespace unica {

// N(0, scale^2 / fan_in) initialised matrix.
Tensor init_weight(Rng& rng, std::size_t fan_in, std::size_t fan_out, double scale = 1.0);

/// y = x W + b with W [in, out].
struct Linear {
    Parameter W;
    Parameter b;
    bool has_bias = true;

    Linear() = default;
    Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool bias = true, double scale = 1.0);

    Var operator()(Tape& t, Var x);
    std::size_t in() const { return W.value.rows(); }
    std::size_t out() const { return W.value.cols(); }
    void collect(std::vector<Parameter*>& out);
};

struct LayerNorm {
    Parameter gamma;
    Parameter beta;

    LayerNorm() = default;
    LayerNorm(const std::string& name, std::size_t dim);

    Var operator()(Tape& t, Var x);
    void collect(std::vector<Parameter*>& out);
};

/// Unmasked multi-head self-attention over the rows of x [n, d].
struct MultiHeadAttention {
    Linear q, k, v, o;
    std::size_t heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(const std::string& name, std::size_t dim, std::size_t heads, Rng& rng);

    // Appends one [n, n] row-stochastic matrix per head to `weights` when given.
    Var operator()(Tape& t, Var x, std::vector<Tensor>* weights = nullptr);
    void collect(std::vector<Parameter*>& out);
};

}  // namespace unica
