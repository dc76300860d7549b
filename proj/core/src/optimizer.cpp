#include "kgfuse/optimizer.hpp"

#include <cmath>

namespace kgfuse {

void Adam::step(const ParamRefs& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (Param* p : params) {
        if (!p->grad.all_finite()) {
            throw NumericError("adam_step: non-finite gradient in parameter '" + p->name + "'");
        }
        auto [it, inserted] = moments_.try_emplace(p->name);
        if (inserted) {
            it->second.m = Tensor::zeros(p->value.shape());
            it->second.v = Tensor::zeros(p->value.shape());
        }
        Tensor& m = it->second.m;
        Tensor& v = it->second.v;
        for (std::int64_t i = 0; i < p->value.size(); ++i) {
            const double g = p->grad.flat(i);
            m.flat(i) = opts_.beta1 * m.flat(i) + (1.0 - opts_.beta1) * g;
            v.flat(i) = opts_.beta2 * v.flat(i) + (1.0 - opts_.beta2) * g * g;
            const double m_hat = m.flat(i) / bc1;
            const double v_hat = v.flat(i) / bc2;
            p->value.flat(i) -= opts_.lr * m_hat / (std::sqrt(v_hat) + opts_.eps);
        }
    }
}

} // namespace kgfuse
