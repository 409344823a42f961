#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "unica/tensor.hpp"

namespace unica {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
    bool valid() const noexcept { return tape_ != nullptr; }
    Tape* tape() const noexcept { return tape_; }
    std::uint32_t id() const noexcept { return id_; }

private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// Linear record of the forward computation.
///
/// Nodes are appended in execution order, so reverse insertion order is a
/// valid reverse topological order for backward. A node only carries a
/// backward closure when at least one of its inputs requires a gradient;
/// computations over constants and frozen parameters cost nothing at
/// backward time. Single owner: one forward/backward pass at a time.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    // With record=false nothing requires a gradient, so no closures are kept.
    explicit Tape(bool record = true) : record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // One leaf per Parameter per tape; frozen parameters act as constants.
    Var param(Parameter& p);

    // Used by ops: appends a node whose gradient requirement is derived from
    // its inputs. `fn` is dropped when no input requires a gradient.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
    Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

    const Tensor& value(std::uint32_t id) const {
        const auto& n = nodes_[id];
        return n.param ? n.param->value : n.value;
    }
    bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
    // Gradient accumulator of a node, zero-initialised on first access.
    Tensor& grad(std::uint32_t id);

    // Propagates d(loss)/d(node) through the tape and adds the result to the
    // grad slot of every non-frozen Parameter leaf. Throws ContractError when
    // loss is not a scalar.
    void backward(Var loss);

    bool recording() const noexcept { return record_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    // Number of nodes holding a backward closure.
    std::size_t op_count() const noexcept;

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        BackwardFn backward;
        Parameter* param = nullptr;
    };

    std::deque<Node> nodes_;  // stable references across appends
    std::unordered_map<const Parameter*, std::uint32_t> param_ids_;
    bool record_;
};

}  // namespace unica
