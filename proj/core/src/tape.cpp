#include "unica/tape.hpp"

#include "unica/errors.hpp"

namespace unica {

const Tensor& Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) return {this, it->second};
    Node n;
    n.requires_grad = record_ && !p.frozen;
    n.param = &p;
    nodes_.push_back(std::move(n));
    const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
    param_ids_.emplace(&p, id);
    return {this, id};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (const auto& v : inputs) {
        if (v.tape() != this) throw ContractError("Tape::record: input belongs to another tape");
        if (nodes_[v.id()].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (const auto& v : inputs) {
        if (v.tape() != this) throw ContractError("Tape::record: input belongs to another tape");
        if (nodes_[v.id()].requires_grad) n.requires_grad = true;
    }
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad(std::uint32_t id) {
    auto& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(value(id).shape());
        n.has_grad = true;
    }
    return n.grad;
}

std::size_t Tape::op_count() const noexcept {
    std::size_t k = 0;
    for (const auto& n : nodes_) k += n.backward ? 1 : 0;
    return k;
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw ContractError("Tape::backward: loss belongs to another tape");
    if (value(loss.id()).size() != 1) {
        throw ContractError("Tape::backward: loss must be a scalar, got shape " +
                            shape_str(value(loss.id()).shape()));
    }
    if (!nodes_[loss.id()].requires_grad) return;
    grad(loss.id())[0] = 1.0;
    for (std::uint32_t i = loss.id() + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.has_grad) continue;
        if (n.backward) n.backward(*this, n.grad);
    }
    for (auto& n : nodes_) {
        if (!n.param || n.param->frozen || !n.has_grad) continue;
        auto& p = *n.param;
        if (p.grad.shape() != p.value.shape()) p.zero_grad();
        auto dst = p.grad.data();
        auto src = n.grad.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
}

}  // namespace unica
