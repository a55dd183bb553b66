#pragma once

#include <cmath>
#include <vector>

#include "mogen/nn/graph.hpp"

namespace mogen::nn {

struct LrSchedule {
  double base_lr = 3e-4;
  Index warmup_steps = 1000;
  Index total_steps = 10000;  // cosine decay horizon
  double min_lr_ratio = 0.05;

  double at(Index step) const {
    if (warmup_steps > 0 && step < warmup_steps)
      return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    const double span = static_cast<double>(std::max<Index>(1, total_steps - warmup_steps));
    double p = static_cast<double>(step - warmup_steps) / span;
    if (p > 1.0) p = 1.0;
    const double cosv = 0.5 * (1.0 + std::cos(M_PI * p));
    return base_lr * (min_lr_ratio + (1.0 - min_lr_ratio) * cosv);
  }
};

// Adam with linear warmup and cosine decay.
template <class S>
class Adam {
 public:
  Adam(std::vector<Param<S>*> params, LrSchedule sched, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), sched_(sched), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step() {
    const double lr = sched_.at(step_);
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (Param<S>* p : params_) {
      p->adam_m = S(beta1_) * p->adam_m + S(1.0 - beta1_) * p->grad;
      p->adam_v = S(beta2_) * p->adam_v +
                  S(1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
      MatX<S> mhat = p->adam_m / S(bc1);
      MatX<S> vhat = p->adam_v / S(bc2);
      p->value -= S(lr) * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + S(eps_)).matrix());
    }
  }

  void zero_grad() {
    for (Param<S>* p : params_) p->zero_grad();
  }

  Index step_count() const { return step_; }
  double current_lr() const { return sched_.at(step_); }

 private:
  std::vector<Param<S>*> params_;
  LrSchedule sched_;
  double beta1_, beta2_, eps_;
  Index step_ = 0;
};

}  // namespace mogen::nn
