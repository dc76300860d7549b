#include "kgfuse/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kgfuse/rng.hpp"

namespace kgfuse {

namespace {

double eval_loss(const ScalarFn& forward) {
    Tape tape;
    Tape::Var out = forward(tape);
    return tape.scalar(out);
}

bool same_bits(double a, double b) {
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

// Seeded sample of `count` distinct indices from [0, n); all of them when
// n <= count.
std::vector<std::int64_t> sample_indices(std::int64_t n, int count, Rng& rng) {
    std::vector<std::int64_t> all(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    if (n <= count) return all;
    // partial Fisher-Yates: the first `count` slots become the sample
    for (int i = 0; i < count; ++i) {
        std::size_t j = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(n - i)));
        std::swap(all[static_cast<std::size_t>(i)], all[j]);
    }
    all.resize(static_cast<std::size_t>(count));
    std::sort(all.begin(), all.end());
    return all;
}

} // namespace

GradCheckReport grad_check(const ScalarFn& forward, const ParamRefs& params,
                           const GradCheckOptions& opts,
                           const std::function<void(const ParamRefs&)>& post_backward_hook) {
    if (!(opts.step >= 1e-6 && opts.step <= 1e-4)) {
        throw ValidationError("grad_check step must lie in [1e-6, 1e-4]");
    }
    const double baseline1 = eval_loss(forward);
    const double baseline2 = eval_loss(forward);
    if (!same_bits(baseline1, baseline2)) {
        throw NumericError("grad_check: forward is non-deterministic (baseline evaluations differ)");
    }

    zero_grads(params);
    {
        Tape tape;
        Tape::Var out = forward(tape);
        tape.backward(out);
    }
    if (post_backward_hook) post_backward_hook(params);

    GradCheckReport report;
    report.pass = true;
    Rng rng(opts.seed);
    const double h = opts.step;
    for (Param* p : params) {
        GradCheckParamStat stat;
        stat.param = p->name;
        auto indices = sample_indices(p->value.size(), opts.max_samples_per_tensor, rng);
        for (std::int64_t idx : indices) {
            const double saved = p->value.flat(idx);
            p->value.flat(idx) = saved + h;
            const double loss_plus = eval_loss(forward);
            p->value.flat(idx) = saved - h;
            const double loss_minus = eval_loss(forward);
            p->value.flat(idx) = saved;

            const double numeric = (loss_plus - loss_minus) / (2.0 * h);
            const double analytic = p->grad.flat(idx);
            if (std::max(std::abs(analytic), std::abs(numeric)) < 1e-8) continue; // both negligible
            const double denom =
                std::max({std::abs(analytic), std::abs(numeric), opts.denom_floor});
            const double rel = std::abs(analytic - numeric) / denom;

            GradCheckEntry entry{p->name, idx, analytic, numeric, rel};
            ++stat.checked;
            stat.max_rel_err = std::max(stat.max_rel_err, rel);
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = entry;
            }
            if (rel >= opts.tol) report.pass = false;
            report.entries.push_back(std::move(entry));
        }
        report.per_param.push_back(std::move(stat));
    }
    return report;
}

} // namespace kgfuse
