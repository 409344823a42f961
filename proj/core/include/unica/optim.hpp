#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "unica/tensor.hpp"

namespace unica {

/// Adam with bias correction and decoupled weight decay. Parameters that are
/// frozen when `step` runs are skipped and never get moment state.
class Adam {
public:
    explicit Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(double lr, double weight_decay = 0.0);
    void zero_grad();
    std::size_t steps() const noexcept { return t_; }
    // Number of parameters that currently hold moment state.
    std::size_t state_count() const noexcept;

private:
    struct Slot {
        Parameter* p;
        Tensor m;
        Tensor v;
    };
    std::vector<Slot> slots_;
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

/// Halves (by `factor`) the learning rate once the monitored value has failed
/// to improve strictly for `patience` consecutive updates.
class ReduceLROnPlateau {
public:
    ReduceLROnPlateau(double lr, std::size_t patience = 5, double factor = 0.5);

    double step(double metric);
    double lr() const noexcept { return lr_; }

private:
    double lr_;
    std::size_t patience_;
    double factor_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t bad_ = 0;
};

class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience = 10) : patience_(patience) {}

    // Returns true when `metric` is a new strict best.
    bool update(double metric);
    bool should_stop() const noexcept { return bad_ >= patience_; }
    double best() const noexcept { return best_; }

private:
    std::size_t patience_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t bad_ = 0;
};

}  // namespace unica
