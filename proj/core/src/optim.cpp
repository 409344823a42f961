#include "unica/optim.hpp"

#include <cmath>

#include "unica/errors.hpp"

namespace unica {

Adam::Adam(std::vector<Parameter*> params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    slots_.reserve(params.size());
    for (auto* p : params) slots_.push_back({p, Tensor(), Tensor()});
}

void Adam::step(double lr, double weight_decay) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& s : slots_) {
        Parameter& p = *s.p;
        if (p.frozen) continue;
        if (p.grad.shape() != p.value.shape()) throw ContractError("adam: gradient shape mismatch for " + p.name);
        if (s.m.empty() && !p.value.empty()) {
            s.m = Tensor(p.value.shape());
            s.v = Tensor(p.value.shape());
        }
        auto w = p.value.data();
        auto g = p.grad.data();
        auto m = s.m.data();
        auto v = s.v.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (weight_decay != 0.0) w[i] -= lr * weight_decay * w[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& s : slots_) s.p->zero_grad();
}

std::size_t Adam::state_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : slots_) n += s.m.empty() ? 0 : 1;
    return n;
}

ReduceLROnPlateau::ReduceLROnPlateau(double lr, std::size_t patience, double factor)
    : lr_(lr), patience_(patience), factor_(factor) {
    if (!(lr > 0.0) || !(factor > 0.0 && factor < 1.0) || patience == 0)
        throw ConfigError("ReduceLROnPlateau: lr > 0, factor in (0, 1) and patience > 0 required");
}

double ReduceLROnPlateau::step(double metric) {
    if (metric < best_) {
        best_ = metric;
        bad_ = 0;
    } else if (++bad_ >= patience_) {
        lr_ *= factor_;
        bad_ = 0;
    }
    return lr_;
}

bool EarlyStopping::update(double metric) {
    if (metric < best_) {
        best_ = metric;
        bad_ = 0;
        return true;
    }
    ++bad_;
    return false;
}

}  // namespace unica
