// Copyright 2026 The flowgen-vqe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "flowvqe/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <fstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "flowvqe/normal.hpp"

namespace flowvqe {

namespace {

using Index = std::int64_t;

/// Mixture CDF outputs are clamped to [kCdfFloor, 1 - kCdfFloor] before the
/// Gaussian quantile.
constexpr double kCdfFloor = 1e-7;
constexpr int kMaxRootIterations = 200;
constexpr double kRootTolerance = 1e-12;

/// Dense work above this many multiply-adds is split across threads.
constexpr std::size_t kParallelMinWork = std::size_t{1} << 16;

inline double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

struct Mixture {
    const double *mu;
    const double *inv_h;
    std::size_t P;
};

struct MixtureValue {
    double F;  ///< CDF
    double f;  ///< density
    double df; ///< density derivative
};

MixtureValue eval_mixture(double x, const Mixture &m) {
    double F = 0.0;
    double f = 0.0;
    double df = 0.0;
    for (std::size_t j = 0; j < m.P; ++j) {
        const double ih = m.inv_h[j];
        const double s = sigmoid((x - m.mu[j]) * ih);
        const double s1 = s * (1.0 - s);
        F += s;
        f += s1 * ih;
        df += s1 * (1.0 - 2.0 * s) * ih * ih;
    }
    const double inv_p = 1.0 / static_cast<double>(m.P);
    return {F * inv_p, f * inv_p, df * inv_p};
}

double mixture_cdf(double x, const Mixture &m) {
    double F = 0.0;
    for (std::size_t j = 0; j < m.P; ++j) {
        F += sigmoid((x - m.mu[j]) * m.inv_h[j]);
    }
    return F / static_cast<double>(m.P);
}

/// Solve F(r) = u for the monotone mixture CDF: doubling bracket from the
/// anchor range, then Newton steps that fall back to bisection whenever they
/// leave the bracket or stop shrinking it fast enough.
double invert_mixture(double u, const Mixture &m, std::size_t layer) {
    // Seed from the anchor range only: padding by the widest bandwidth can
    // produce an astronomically wide bracket once a bandwidth blows up.
    double lo = m.mu[0];
    double hi = m.mu[0];
    for (std::size_t j = 0; j < m.P; ++j) {
        lo = std::min(lo, m.mu[j]);
        hi = std::max(hi, m.mu[j]);
    }
    lo -= 1.0;
    hi += 1.0;
    double width = hi - lo;
    double F_lo = mixture_cdf(lo, m);
    double F_hi = mixture_cdf(hi, m);
    int expand = 0;
    while (F_lo > u) {
        lo -= width;
        width *= 2.0;
        F_lo = mixture_cdf(lo, m);
        if (++expand > 2000 || !std::isfinite(lo)) {
            throw std::runtime_error("marginal inversion could not bracket the root in layer " +
                                     std::to_string(layer));
        }
    }
    while (F_hi < u) {
        hi += width;
        width *= 2.0;
        F_hi = mixture_cdf(hi, m);
        if (++expand > 2000 || !std::isfinite(hi)) {
            throw std::runtime_error("marginal inversion could not bracket the root in layer " +
                                     std::to_string(layer));
        }
    }
    double r = (F_hi > F_lo) ? lo + (u - F_lo) * (hi - lo) / (F_hi - F_lo) : 0.5 * (lo + hi);
    double step_old = hi - lo;
    double step = step_old;
    for (int it = 0; it < kMaxRootIterations; ++it) {
        const auto v = eval_mixture(r, m);
        const double resid = v.F - u;
        if (std::abs(resid) <= 0.01 * kRootTolerance) {
            return r;
        }
        if (resid < 0.0) {
            lo = r;
        } else {
            hi = r;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(r))) {
            // Root resolved to machine precision in x; a steep F may still
            // leave |F - u| above tolerance between adjacent doubles.
            return r;
        }
        // Bisect when Newton leaves the bracket or fails to halve the step
        // of two iterations ago; nearly step-shaped CDFs otherwise stall.
        double next = v.f > 0.0 ? r - resid / v.f : lo - 1.0;
        step_old = step;
        if (!(next > lo && next < hi) || 2.0 * std::abs(next - r) > std::abs(step_old)) {
            next = 0.5 * (lo + hi);
        }
        step = next - r;
        r = next;
    }
    if (std::abs(mixture_cdf(r, m) - u) <= kRootTolerance) {
        return r;
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail), " (u=%.17g, r=%.17g, residual=%.3g, bracket=[%.17g, %.17g])",
                  u, r, mixture_cdf(r, m) - u, lo, hi);
    throw std::runtime_error("marginal inversion did not converge in layer " +
                             std::to_string(layer) + detail);
}

void householder_apply(std::span<double> x, std::span<const double> v) {
    double vv = 0.0;
    double vx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        vv += v[k] * v[k];
        vx += v[k] * x[k];
    }
    const double c = 2.0 * vx / vv;
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] -= c * v[k];
    }
}

double base_log_density(std::span<const double> z, double var) {
    double s = 0.0;
    for (double zi : z) {
        s += zi * zi;
    }
    const auto d = static_cast<double>(z.size());
    return -0.5 * s / var - 0.5 * d * std::log(var) - d * normal::kLogSqrtTwoPi;
}

void check_finite(std::span<const double> v, std::size_t layer) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw std::runtime_error("non-finite intermediate in flow layer " +
                                     std::to_string(layer));
        }
    }
}

double glorot_limit(std::size_t in, std::size_t out) {
    return std::sqrt(6.0 / static_cast<double>(in + out));
}

/// y = W x + b with W row-major (out x in).
void dense_forward(const double *W, const double *b, std::span<const double> x, std::span<double> y) {
    const std::size_t in = x.size();
    const std::size_t out = y.size();
#pragma omp parallel for schedule(static) if (in * out >= kParallelMinWork)
    for (Index o = 0; o < static_cast<Index>(out); ++o) {
        const double *row = W + static_cast<std::size_t>(o) * in;
        double acc = b[o];
        for (std::size_t i = 0; i < in; ++i) {
            acc += row[i] * x[i];
        }
        y[static_cast<std::size_t>(o)] = acc;
    }
}

/// (spread, bandwidth) minimizing max |Phi^-1(F(x)) - x| over |x| <= 1.5,
/// fitted offline per mixture size; sizes between entries use the entry below.
std::pair<double, double> identity_calibration(std::size_t P) {
    struct Entry {
        std::size_t P;
        double spread, bandwidth;
    };
    static constexpr Entry table[] = {
        {1, 0.45641, 0.58405},  {2, 0.76541, 0.49080},  {4, 0.68552, 0.46436},
        {8, 0.69318, 0.43419},  {16, 0.93579, 0.19567}, {32, 0.95553, 0.16341},
        {64, 0.96027, 0.15464},
    };
    Entry pick = table[0];
    for (const auto &e : table) {
        if (e.P <= P) {
            pick = e;
        }
    }
    return {pick.spread, pick.bandwidth};
}

} // namespace

FlowModel::FlowModel(const FlowConfig &cfg, std::vector<std::string> term_order)
    : cfg_(cfg), term_order_(std::move(term_order)) {
    if (cfg_.dim == 0) {
        throw std::invalid_argument("flow dimension must be positive");
    }
    if (cfg_.context_dim == 0) {
        throw std::invalid_argument("flow context dimension must be positive");
    }
    if (cfg_.mixture == 0) {
        throw std::invalid_argument("mixture size must be at least 1");
    }
    if (cfg_.embed_dim == 0 || (cfg_.hidden_layers > 0 && cfg_.hidden_width == 0)) {
        throw std::invalid_argument("conditioner widths must be positive");
    }
    if (!(cfg_.base_variance > 0.0)) {
        throw std::invalid_argument("base variance must be positive");
    }
    if (!term_order_.empty() && term_order_.size() != cfg_.context_dim) {
        throw std::invalid_argument("term order length does not match context_dim");
    }
    reflections_ = cfg_.reflections == 0 ? cfg_.dim : cfg_.reflections;
    build_layout();
    initialize();
}

std::size_t FlowModel::add_block(ParamClass cls, std::size_t size) {
    const std::size_t offset = params_.size();
    blocks_.push_back({cls, offset, size});
    params_.resize(offset + size, 0.0);
    return offset;
}

void FlowModel::build_layout() {
    const std::size_t d = cfg_.dim;
    const std::size_t K = cfg_.layers;
    const std::size_t P = cfg_.mixture;
    embed_w_ = add_block(ParamClass::EmbeddingWeight, cfg_.embed_dim * cfg_.context_dim);
    embed_b_ = add_block(ParamClass::EmbeddingBias, cfg_.embed_dim);
    hh_begin_ = add_block(ParamClass::Householder, K * reflections_ * d);
    if (K == 0) {
        return;
    }
    const std::size_t groups = cfg_.share_conditioner ? 1 : K;
    const std::size_t per_group = cfg_.share_conditioner ? K : 1;
    for (std::size_t g = 0; g < groups; ++g) {
        Conditioner c;
        c.first_layer = g * per_group;
        c.layer_count = per_group;
        std::size_t in = cfg_.embed_dim;
        for (std::size_t l = 0; l < cfg_.hidden_layers; ++l) {
            DenseLayer dl{in, cfg_.hidden_width, 0, 0};
            dl.w = add_block(ParamClass::ConditionerWeight, dl.out * dl.in);
            dl.b = add_block(ParamClass::ConditionerBias, dl.out);
            c.dense.push_back(dl);
            in = cfg_.hidden_width;
        }
        DenseLayer head{in, per_group * 2 * d * P, 0, 0};
        head.w = add_block(ParamClass::ConditionerWeight, head.out * head.in);
        head.b = params_.size();
        for (std::size_t l = 0; l < per_group; ++l) {
            add_block(ParamClass::Anchor, d * P);
            add_block(ParamClass::LogBandwidth, d * P);
        }
        c.dense.push_back(head);
        conditioners_.push_back(std::move(c));
    }
}

void FlowModel::initialize() {
    const std::size_t d = cfg_.dim;
    const std::size_t P = cfg_.mixture;
    Rng rng = substream(cfg_.seed, {0x696e6974ULL});
    auto uniform_fill = [&](std::size_t offset, std::size_t count, double limit) {
        for (std::size_t i = 0; i < count; ++i) {
            params_[offset + i] = limit * (2.0 * uniform01(rng) - 1.0);
        }
    };
    uniform_fill(embed_w_, cfg_.embed_dim * cfg_.context_dim,
                 glorot_limit(cfg_.context_dim, cfg_.embed_dim));
    for (std::size_t layer = 0; layer < cfg_.layers; ++layer) {
        for (std::size_t i = 0; i < reflections_; ++i) {
            auto v = householder(layer, i);
            double norm = 0.0;
            do {
                norm = 0.0;
                for (auto &x : v) {
                    x = standard_normal(rng);
                    norm += x * x;
                }
            } while (norm < 1e-12);
            norm = std::sqrt(norm);
            for (auto &x : v) {
                x /= norm;
            }
        }
    }
    // Mixture calibrated so each marginal map starts close to the identity:
    // anchors on scaled normal quantiles, one shared bandwidth.
    const auto [spread, bandwidth] = identity_calibration(P);
    std::vector<double> anchors(P);
    for (std::size_t j = 0; j < P; ++j) {
        anchors[j] = spread * normal::quantile((static_cast<double>(j) + 0.5) / static_cast<double>(P));
    }
    for (auto &c : conditioners_) {
        for (std::size_t l = 0; l + 1 < c.dense.size(); ++l) {
            const auto &dl = c.dense[l];
            uniform_fill(dl.w, dl.in * dl.out, glorot_limit(dl.in, dl.out));
        }
        const auto &head = c.dense.back();
        for (std::size_t l = 0; l < c.layer_count; ++l) {
            double *out = params_.data() + head.b + l * 2 * d * P;
            for (std::size_t k = 0; k < d; ++k) {
                for (std::size_t j = 0; j < P; ++j) {
                    out[k * P + j] = anchors[j];
                    out[d * P + k * P + j] = std::log(bandwidth);
                }
            }
        }
    }
}

std::size_t FlowModel::hh_offset(std::size_t layer, std::size_t i) const {
    return hh_begin_ + (layer * reflections_ + i) * cfg_.dim;
}

std::span<double> FlowModel::householder(std::size_t layer, std::size_t i) {
    if (layer >= cfg_.layers || i >= reflections_) {
        throw std::out_of_range("householder index out of range");
    }
    return {params_.data() + hh_offset(layer, i), cfg_.dim};
}

void FlowModel::check_context(const ContextVector &ctx) const {
    if (ctx.values.size() != cfg_.context_dim) {
        throw std::invalid_argument("context has length " + std::to_string(ctx.values.size()) +
                                    ", flow expects " + std::to_string(cfg_.context_dim));
    }
    if (!term_order_.empty() && !ctx.term_order.empty() && ctx.term_order != term_order_) {
        throw std::invalid_argument("context term order does not match the flow's family order");
    }
}

void FlowModel::check_dim(std::span<const double> v, const char *what) const {
    if (v.size() != cfg_.dim) {
        throw std::invalid_argument(std::string(what) + " has length " + std::to_string(v.size()) +
                                    ", flow dimension is " + std::to_string(cfg_.dim));
    }
}

Conditioning FlowModel::condition(const ContextVector &ctx) const {
    check_context(ctx);
    const std::size_t d = cfg_.dim;
    const std::size_t P = cfg_.mixture;
    const std::size_t dP = d * P;
    Conditioning c;
    c.context = ctx.values;
    c.embedding.resize(cfg_.embed_dim);
    dense_forward(params_.data() + embed_w_, params_.data() + embed_b_, c.context, c.embedding);
    c.anchors.resize(cfg_.layers * dP);
    c.log_bw.resize(cfg_.layers * dP);
    c.inv_bw.resize(cfg_.layers * dP);
    c.pre.resize(conditioners_.size());
    c.act.resize(conditioners_.size());
    for (std::size_t ci = 0; ci < conditioners_.size(); ++ci) {
        const auto &cond = conditioners_[ci];
        std::span<const double> h = c.embedding;
        auto &pre = c.pre[ci];
        auto &act = c.act[ci];
        pre.resize(cond.dense.size());
        act.resize(cond.dense.size());
        for (std::size_t l = 0; l < cond.dense.size(); ++l) {
            const auto &dl = cond.dense[l];
            pre[l].resize(dl.out);
            dense_forward(params_.data() + dl.w, params_.data() + dl.b, h, pre[l]);
            if (l + 1 < cond.dense.size()) {
                act[l].resize(dl.out);
                std::transform(pre[l].begin(), pre[l].end(), act[l].begin(), elu);
                h = act[l];
            }
        }
        const auto &out = pre.back();
        for (std::size_t l = 0; l < cond.layer_count; ++l) {
            const std::size_t layer = cond.first_layer + l;
            std::copy_n(out.begin() + static_cast<std::ptrdiff_t>(l * 2 * dP), dP,
                        c.anchors.begin() + static_cast<std::ptrdiff_t>(layer * dP));
            std::copy_n(out.begin() + static_cast<std::ptrdiff_t>(l * 2 * dP + dP), dP,
                        c.log_bw.begin() + static_cast<std::ptrdiff_t>(layer * dP));
        }
    }
    for (std::size_t i = 0; i < c.log_bw.size(); ++i) {
        c.inv_bw[i] = std::exp(-c.log_bw[i]);
    }
    check_finite(c.anchors, 0);
    check_finite(c.inv_bw, 0);
    return c;
}

ParameterVector FlowModel::forward(std::span<const double> z, const ContextVector &ctx) const {
    return forward(z, condition(ctx));
}

ParameterVector FlowModel::forward(std::span<const double> z, const Conditioning &c,
                                   double *logdet_out) const {
    check_dim(z, "latent vector");
    const std::size_t d = cfg_.dim;
    const std::size_t P = cfg_.mixture;
    std::vector<double> x(z.begin(), z.end());
    double logdet = 0.0;
    for (std::size_t layer = 0; layer < cfg_.layers; ++layer) {
        // R = H_1 ... H_m, so H_m acts first.
        for (std::size_t i = reflections_; i-- > 0;) {
            householder_apply(x, {params_.data() + hh_offset(layer, i), d});
        }
        for (std::size_t k = 0; k < d; ++k) {
            const Mixture m{c.anchors.data() + (layer * d + k) * P,
                            c.inv_bw.data() + (layer * d + k) * P, P};
            const auto v = eval_mixture(x[k], m);
            const double u = std::clamp(v.F, kCdfFloor, 1.0 - kCdfFloor);
            const double y = normal::quantile(u);
            logdet += std::log(v.f) - normal::log_pdf(y);
            x[k] = y;
        }
        check_finite(x, layer + 1);
    }
    if (logdet_out != nullptr) {
        *logdet_out = logdet;
    }
    return x;
}

InverseResult FlowModel::inverse(std::span<const double> theta, const ContextVector &ctx) const {
    return inverse(theta, condition(ctx));
}

InverseResult FlowModel::inverse(std::span<const double> theta, const Conditioning &c) const {
    check_dim(theta, "parameter vector");
    const std::size_t d = cfg_.dim;
    const std::size_t P = cfg_.mixture;
    InverseResult res;
    res.z.assign(theta.begin(), theta.end());
    auto &x = res.z;
    for (std::size_t layer = cfg_.layers; layer-- > 0;) {
        for (std::size_t k = 0; k < d; ++k) {
            const Mixture m{c.anchors.data() + (layer * d + k) * P,
                            c.inv_bw.data() + (layer * d + k) * P, P};
            const double y = x[k];
            const double u = std::clamp(normal::cdf(y), kCdfFloor, 1.0 - kCdfFloor);
            const double r = invert_mixture(u, m, layer + 1);
            res.logdet += normal::log_pdf(y) - std::log(eval_mixture(r, m).f);
            x[k] = r;
        }
        for (std::size_t i = 0; i < reflections_; ++i) {
            householder_apply(x, {params_.data() + hh_offset(layer, i), d});
        }
        check_finite(x, layer + 1);
    }
    return res;
}

double FlowModel::log_prob(std::span<const double> theta, const ContextVector &ctx) const {
    return log_prob(theta, condition(ctx));
}

double FlowModel::log_prob(std::span<const double> theta, const Conditioning &c) const {
    const auto inv = inverse(theta, c);
    return base_log_density(inv.z, cfg_.base_variance) + inv.logdet;
}

FlowSample FlowModel::sample_one(const Conditioning &c, Rng &rng) const {
    std::vector<double> z(cfg_.dim);
    const double sd = std::sqrt(cfg_.base_variance);
    for (auto &zi : z) {
        zi = sd * standard_normal(rng);
    }
    double logdet = 0.0;
    FlowSample s;
    s.theta = forward(z, c, &logdet);
    s.logp = base_log_density(z, cfg_.base_variance) - logdet;
    return s;
}

std::vector<FlowSample> FlowModel::sample(const ContextVector &ctx, std::size_t count,
                                          Rng &rng) const {
    if (count == 0) {
        throw std::invalid_argument("sample count must be at least 1");
    }
    const auto c = condition(ctx);
    std::vector<FlowSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(sample_one(c, rng));
    }
    return out;
}

void FlowModel::backprop_sample(std::span<const double> theta, const Conditioning &c,
                                double weight, std::span<double> marginal_adj,
                                std::span<double> grad, double &logp) const {
    const std::size_t d = cfg_.dim;
    const std::size_t P = cfg_.mixture;
    const std::size_t K = cfg_.layers;
    const std::size_t m_ref = reflections_;
    const double inv_p = 1.0 / static_cast<double>(P);

    // Inverse pass with tape. Layer index follows generation order (0 = first
    // applied to z); the inverse visits K-1 .. 0.
    std::vector<double> ys(K * d), rs(K * d);
    std::vector<unsigned char> clamped(K * d, 0);
    std::vector<double> hh_in(K * m_ref * d);
    std::vector<double> x(theta.begin(), theta.end());
    double logdet = 0.0;
    for (std::size_t layer = K; layer-- > 0;) {
        for (std::size_t k = 0; k < d; ++k) {
            const Mixture mx{c.anchors.data() + (layer * d + k) * P,
                             c.inv_bw.data() + (layer * d + k) * P, P};
            const double y = x[k];
            const double u_raw = normal::cdf(y);
            const double u = std::clamp(u_raw, kCdfFloor, 1.0 - kCdfFloor);
            const double r = invert_mixture(u, mx, layer + 1);
            ys[layer * d + k] = y;
            rs[layer * d + k] = r;
            clamped[layer * d + k] = static_cast<unsigned char>(u != u_raw);
            logdet += normal::log_pdf(y) - std::log(eval_mixture(r, mx).f);
            x[k] = r;
        }
        for (std::size_t i = 0; i < m_ref; ++i) {
            std::copy(x.begin(), x.end(),
                      hh_in.begin() + static_cast<std::ptrdiff_t>((layer * m_ref + i) * d));
            householder_apply(x, {params_.data() + hh_offset(layer, i), d});
        }
        check_finite(x, layer + 1);
    }
    logp = base_log_density(x, cfg_.base_variance) + logdet;

    // Reverse sweep: adjoint of weight * log p, from z back up to theta.
    std::vector<double> adj(d);
    for (std::size_t k = 0; k < d; ++k) {
        adj[k] = -weight * x[k] / cfg_.base_variance;
    }
    for (std::size_t layer = 0; layer < K; ++layer) {
        // x_out = H_m ... H_1 r: undo in reverse application order.
        for (std::size_t i = m_ref; i-- > 0;) {
            const double *v = params_.data() + hh_offset(layer, i);
            const double *a = hh_in.data() + (layer * m_ref + i) * d;
            double vv = 0.0, va = 0.0, vg = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                vv += v[k] * v[k];
                va += v[k] * a[k];
                vg += v[k] * adj[k];
            }
            double *gv = grad.data() + (hh_offset(layer, i) - hh_begin_);
            for (std::size_t k = 0; k < d; ++k) {
                gv[k] += -2.0 * (adj[k] * va / vv + vg * a[k] / vv) + 4.0 * va * vg * v[k] / (vv * vv);
            }
            const double cg = 2.0 * vg / vv;
            for (std::size_t k = 0; k < d; ++k) {
                adj[k] -= cg * v[k];
            }
        }
        // adj now holds d(w log p)/dr for this layer.
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t base = (layer * d + k) * P;
            const Mixture mx{c.anchors.data() + base, c.inv_bw.data() + base, P};
            const double r = rs[layer * d + k];
            const double y = ys[layer * d + k];
            const auto v = eval_mixture(r, mx);
            // Total adjoint on r including the -log f(r) log-det term.
            const double A = adj[k] - weight * v.df / v.f;
            const double dr_dy = clamped[layer * d + k] != 0U ? 0.0 : std::exp(normal::log_pdf(y)) / v.f;
            double *g_mu = marginal_adj.data() + 2 * layer * d * P + k * P;
            double *g_lh = g_mu + d * P;
            for (std::size_t j = 0; j < P; ++j) {
                const double ih = mx.inv_h[j];
                const double t = (r - mx.mu[j]) * ih;
                const double s = sigmoid(t);
                const double s1 = s * (1.0 - s);
                const double s2 = s1 * (1.0 - 2.0 * s);
                const double dF_dmu = -inv_p * s1 * ih;
                const double dF_dlh = -inv_p * s1 * t;
                const double df_dmu = -inv_p * s2 * ih * ih;
                const double df_dlh = -inv_p * (s2 * t + s1) * ih;
                g_mu[j] += A * (-dF_dmu / v.f) - weight * df_dmu / v.f;
                g_lh[j] += A * (-dF_dlh / v.f) - weight * df_dlh / v.f;
            }
            adj[k] = A * dr_dy - weight * y;
        }
    }
}

void FlowModel::backprop_conditioner(const Conditioning &c, std::span<const double> marginal_adj,
                                     std::span<double> grad) const {
    const std::size_t dP = cfg_.dim * cfg_.mixture;
    std::vector<double> adj_embed(cfg_.embed_dim, 0.0);
    for (std::size_t ci = 0; ci < conditioners_.size(); ++ci) {
        const auto &cond = conditioners_[ci];
        std::vector<double> g(cond.dense.back().out);
        for (std::size_t l = 0; l < cond.layer_count; ++l) {
            const std::size_t layer = cond.first_layer + l;
            std::copy_n(marginal_adj.begin() + static_cast<std::ptrdiff_t>(2 * layer * dP), 2 * dP,
                        g.begin() + static_cast<std::ptrdiff_t>(l * 2 * dP));
        }
        for (std::size_t li = cond.dense.size(); li-- > 0;) {
            const auto &dl = cond.dense[li];
            std::span<const double> input =
                li == 0 ? std::span<const double>(c.embedding) : std::span<const double>(c.act[ci][li - 1]);
            double *gw = grad.data() + dl.w;
            double *gb = grad.data() + dl.b;
#pragma omp parallel for schedule(static) if (dl.in * dl.out >= kParallelMinWork)
            for (Index o = 0; o < static_cast<Index>(dl.out); ++o) {
                const double go = g[static_cast<std::size_t>(o)];
                gb[o] += go;
                if (go == 0.0) {
                    continue;
                }
                double *row = gw + static_cast<std::size_t>(o) * dl.in;
                for (std::size_t i = 0; i < dl.in; ++i) {
                    row[i] += go * input[i];
                }
            }
            std::vector<double> g_in(dl.in, 0.0);
            const double *W = params_.data() + dl.w;
            for (std::size_t o = 0; o < dl.out; ++o) {
                const double go = g[o];
                if (go == 0.0) {
                    continue;
                }
                const double *row = W + o * dl.in;
                for (std::size_t i = 0; i < dl.in; ++i) {
                    g_in[i] += go * row[i];
                }
            }
            if (li == 0) {
                for (std::size_t i = 0; i < dl.in; ++i) {
                    adj_embed[i] += g_in[i];
                }
            } else {
                const auto &pre = c.pre[ci][li - 1];
                for (std::size_t i = 0; i < dl.in; ++i) {
                    g_in[i] *= pre[i] > 0.0 ? 1.0 : std::exp(pre[i]);
                }
                g = std::move(g_in);
            }
        }
    }
    const std::size_t C = cfg_.context_dim;
    for (std::size_t e = 0; e < cfg_.embed_dim; ++e) {
        grad[embed_b_ + e] += adj_embed[e];
        for (std::size_t i = 0; i < C; ++i) {
            grad[embed_w_ + e * C + i] += adj_embed[e] * c.context[i];
        }
    }
}

NllResult FlowModel::weighted_log_prob_grad(std::span<const ConditionedSample> batch,
                                            std::span<const double> weights) const {
    if (batch.empty()) {
        throw std::invalid_argument("empty batch");
    }
    if (weights.size() != batch.size()) {
        throw std::invalid_argument("weights and batch differ in length");
    }
    // Distinct contexts in order of first appearance.
    std::vector<const ContextVector *> distinct;
    std::vector<std::size_t> group(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ContextVector *ctx = batch[i].context;
        if (ctx == nullptr) {
            throw std::invalid_argument("batch entry without a context");
        }
        check_dim(batch[i].theta, "parameter vector");
        std::size_t gidx = distinct.size();
        for (std::size_t j = 0; j < distinct.size(); ++j) {
            if (distinct[j]->values == ctx->values) {
                gidx = j;
                break;
            }
        }
        if (gidx == distinct.size()) {
            distinct.push_back(ctx);
        }
        group[i] = gidx;
    }
    std::vector<Conditioning> conds;
    conds.reserve(distinct.size());
    for (const auto *ctx : distinct) {
        conds.push_back(condition(*ctx));
    }

    const std::size_t madj_size = 2 * cfg_.layers * cfg_.dim * cfg_.mixture;
    const std::size_t n = batch.size();
    std::vector<std::vector<double>> sample_madj(n);
    std::vector<std::vector<double>> sample_grad(n);
    std::vector<double> logps(n, 0.0);
    std::vector<std::string> errors(n);
    const std::size_t hh_size = cfg_.layers * reflections_ * cfg_.dim;
#pragma omp parallel for schedule(dynamic)
    for (Index si = 0; si < static_cast<Index>(n); ++si) {
        const auto i = static_cast<std::size_t>(si);
        try {
            sample_madj[i].assign(madj_size, 0.0);
            sample_grad[i].assign(hh_size, 0.0);
            backprop_sample(batch[i].theta, conds[group[i]], weights[i], sample_madj[i],
                            sample_grad[i], logps[i]);
        } catch (const std::exception &e) {
            errors[i] = e.what();
        }
    }
    for (const auto &e : errors) {
        if (!e.empty()) {
            throw std::runtime_error(e);
        }
    }

    NllResult res;
    res.grad.assign(params_.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        res.loss += weights[i] * logps[i];
        for (std::size_t p = 0; p < hh_size; ++p) {
            res.grad[hh_begin_ + p] += sample_grad[i][p];
        }
    }
    for (std::size_t gidx = 0; gidx < conds.size(); ++gidx) {
        std::vector<double> madj(madj_size, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (group[i] == gidx) {
                for (std::size_t p = 0; p < madj_size; ++p) {
                    madj[p] += sample_madj[i][p];
                }
            }
        }
        if (cfg_.layers > 0) {
            backprop_conditioner(conds[gidx], madj, res.grad);
        }
    }
    return res;
}

NllResult FlowModel::nll_and_grad(std::span<const ConditionedSample> batch) const {
    if (batch.empty()) {
        throw std::invalid_argument("empty batch");
    }
    const std::vector<double> weights(batch.size(), -1.0 / static_cast<double>(batch.size()));
    return weighted_log_prob_grad(batch, weights);
}

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'V', 'Q', 'E', 'F', 'L', 'O', 'W'};
constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace

void FlowModel::save(const std::filesystem::path &path) const {
    nlohmann::ordered_json meta;
    meta["dim"] = cfg_.dim;
    meta["context_dim"] = cfg_.context_dim;
    meta["layers"] = cfg_.layers;
    meta["mixture"] = cfg_.mixture;
    meta["embed_dim"] = cfg_.embed_dim;
    meta["hidden_width"] = cfg_.hidden_width;
    meta["hidden_layers"] = cfg_.hidden_layers;
    meta["reflections"] = reflections_;
    meta["base_variance"] = cfg_.base_variance;
    meta["share_conditioner"] = cfg_.share_conditioner;
    meta["seed"] = cfg_.seed;
    meta["term_order"] = term_order_;
    meta["parameter_count"] = params_.size();
    const std::string text = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    }
    const auto meta_len = static_cast<std::uint64_t>(text.size());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char *>(&kCheckpointVersion), sizeof(kCheckpointVersion));
    out.write(reinterpret_cast<const char *>(&meta_len), sizeof(meta_len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char *>(params_.data()),
              static_cast<std::streamsize>(params_.size() * sizeof(double)));
    if (!out) {
        throw std::runtime_error("failed writing checkpoint: " + path.string());
    }
}

FlowModel FlowModel::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint: " + path.string());
    }
    char magic[sizeof(kCheckpointMagic)] = {};
    std::uint32_t version = 0;
    std::uint64_t meta_len = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char *>(&version), sizeof(version));
    in.read(reinterpret_cast<char *>(&meta_len), sizeof(meta_len));
    if (!in || !std::equal(magic, magic + sizeof(magic), kCheckpointMagic)) {
        throw std::runtime_error("not a flow checkpoint: " + path.string());
    }
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    if (meta_len > (std::uint64_t{1} << 30)) {
        throw std::runtime_error("corrupt checkpoint metadata length");
    }
    std::string text(meta_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(meta_len));
    if (!in) {
        throw std::runtime_error("truncated checkpoint: " + path.string());
    }
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw std::runtime_error(std::string("corrupt checkpoint metadata: ") + e.what());
    }
    FlowConfig cfg;
    try {
        cfg.dim = meta.at("dim").get<std::size_t>();
        cfg.context_dim = meta.at("context_dim").get<std::size_t>();
        cfg.layers = meta.at("layers").get<std::size_t>();
        cfg.mixture = meta.at("mixture").get<std::size_t>();
        cfg.embed_dim = meta.at("embed_dim").get<std::size_t>();
        cfg.hidden_width = meta.at("hidden_width").get<std::size_t>();
        cfg.hidden_layers = meta.at("hidden_layers").get<std::size_t>();
        cfg.reflections = meta.at("reflections").get<std::size_t>();
        cfg.base_variance = meta.at("base_variance").get<double>();
        cfg.share_conditioner = meta.at("share_conditioner").get<bool>();
        cfg.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception &e) {
        throw std::runtime_error(std::string("corrupt checkpoint metadata: ") + e.what());
    }
    FlowModel model(cfg, meta.value("term_order", std::vector<std::string>{}));
    if (meta.value("parameter_count", std::size_t{0}) != model.params_.size()) {
        throw std::runtime_error("checkpoint parameter count does not match its configuration");
    }
    in.read(reinterpret_cast<char *>(model.params_.data()),
            static_cast<std::streamsize>(model.params_.size() * sizeof(double)));
    if (!in) {
        throw std::runtime_error("truncated checkpoint: " + path.string());
    }
    return model;
}

} // namespace flowvqe
