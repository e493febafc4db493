#include "mage/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace mage {

GradCheckResult grad_check(const LossBuilder& f, std::vector<Parameter*> params, double step) {
  Tape tape;
  const Var loss = f(tape);
  if (tape.value(loss).size() != 1) throw std::invalid_argument("grad_check: loss must be scalar");
  for (Parameter* p : params) p->grad.set_zero();
  tape.backward(loss);

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  auto eval = [&]() {
    Tape t;
    return t.value(f(t)).item();
  };

  GradCheckResult result;
  for (Index pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (Index i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = eval();
      p.value[i] = saved - step;
      const double down = eval();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace mage
