#include "enprune/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace enprune {

void ReplayBuffer::push(Transition t) {
    if (static_cast<int64_t>(items_.size()) < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[static_cast<size_t>(head_)] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

std::vector<int64_t> ReplayBuffer::sample_indices(int64_t batch, Rng& rng) const {
    const int64_t n = size();
    if (batch > n) throw std::invalid_argument("ReplayBuffer: batch larger than buffer");
    // partial Fisher-Yates over an index array
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int64_t i = 0; i < batch; ++i) {
        const int64_t j = i + rng.uniform_int(n - i);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(batch));
    return idx;
}

namespace {

void init_uniform(std::vector<float>& w, int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : w) v = static_cast<float>(rng.uniform(-bound, bound));
}

// y = W x + b with double accumulation; W is out x in row-major.
void affine(const std::vector<float>& w, const std::vector<float>& b, const double* x, int64_t in,
            int64_t out, double* y) {
    for (int64_t o = 0; o < out; ++o) {
        double acc = b[static_cast<size_t>(o)];
        const float* row = w.data() + o * in;
        for (int64_t i = 0; i < in; ++i) acc += static_cast<double>(row[i]) * x[i];
        y[o] = acc;
    }
}

}  // namespace

Mlp::Mlp(int64_t in_dim, int64_t hidden, Head head, Rng& rng)
    : in_dim_(in_dim), hidden_(hidden), head_(head) {
    w1_.resize(static_cast<size_t>(hidden * in_dim));
    b1_.assign(static_cast<size_t>(hidden), 0.0f);
    w2_.resize(static_cast<size_t>(hidden * hidden));
    b2_.assign(static_cast<size_t>(hidden), 0.0f);
    w3_.resize(static_cast<size_t>(hidden));
    init_uniform(w1_, in_dim, rng);
    init_uniform(w2_, hidden, rng);
    init_uniform(w3_, hidden, rng);
}

double Mlp::forward(const float* x, int64_t n, Trace* trace) const {
    if (n != in_dim_)
        throw std::invalid_argument("Mlp: input dimension " + std::to_string(n) +
                                    " does not match network dimension " +
                                    std::to_string(in_dim_));
    Trace local;
    Trace& t = trace ? *trace : local;
    t.x.assign(x, x + n);
    t.z1.resize(static_cast<size_t>(hidden_));
    t.a1.resize(static_cast<size_t>(hidden_));
    t.z2.resize(static_cast<size_t>(hidden_));
    t.a2.resize(static_cast<size_t>(hidden_));
    affine(w1_, b1_, t.x.data(), in_dim_, hidden_, t.z1.data());
    for (int64_t i = 0; i < hidden_; ++i) t.a1[static_cast<size_t>(i)] = std::max(t.z1[static_cast<size_t>(i)], 0.0);
    affine(w2_, b2_, t.a1.data(), hidden_, hidden_, t.z2.data());
    for (int64_t i = 0; i < hidden_; ++i) t.a2[static_cast<size_t>(i)] = std::max(t.z2[static_cast<size_t>(i)], 0.0);
    double acc = b3_;
    for (int64_t i = 0; i < hidden_; ++i)
        acc += static_cast<double>(w3_[static_cast<size_t>(i)]) * t.a2[static_cast<size_t>(i)];
    t.z3 = acc;
    t.out = head_ == Head::Sigmoid ? 1.0 / (1.0 + std::exp(-acc)) : acc;
    return t.out;
}

void Mlp::Grads::init_like(const Mlp& m) {
    w1.assign(static_cast<size_t>(m.hidden_ * m.in_dim_), 0.0);
    b1.assign(static_cast<size_t>(m.hidden_), 0.0);
    w2.assign(static_cast<size_t>(m.hidden_ * m.hidden_), 0.0);
    b2.assign(static_cast<size_t>(m.hidden_), 0.0);
    w3.assign(static_cast<size_t>(m.hidden_), 0.0);
    b3 = 0.0;
}

void Mlp::backward(const Trace& t, double upstream, Grads& g,
                   std::vector<double>* input_grad) const {
    const double dz3 = head_ == Head::Sigmoid ? upstream * t.out * (1.0 - t.out) : upstream;
    g.b3 += dz3;
    std::vector<double> da2(static_cast<size_t>(hidden_));
    for (int64_t i = 0; i < hidden_; ++i) {
        g.w3[static_cast<size_t>(i)] += dz3 * t.a2[static_cast<size_t>(i)];
        da2[static_cast<size_t>(i)] = dz3 * static_cast<double>(w3_[static_cast<size_t>(i)]);
    }
    std::vector<double> dz2(static_cast<size_t>(hidden_));
    for (int64_t i = 0; i < hidden_; ++i)
        dz2[static_cast<size_t>(i)] = t.z2[static_cast<size_t>(i)] > 0.0 ? da2[static_cast<size_t>(i)] : 0.0;
    std::vector<double> da1(static_cast<size_t>(hidden_), 0.0);
    for (int64_t o = 0; o < hidden_; ++o) {
        const double d = dz2[static_cast<size_t>(o)];
        g.b2[static_cast<size_t>(o)] += d;
        if (d == 0.0) continue;
        double* gw = g.w2.data() + o * hidden_;
        const float* w = w2_.data() + o * hidden_;
        for (int64_t i = 0; i < hidden_; ++i) {
            gw[i] += d * t.a1[static_cast<size_t>(i)];
            da1[static_cast<size_t>(i)] += d * static_cast<double>(w[i]);
        }
    }
    std::vector<double> dz1(static_cast<size_t>(hidden_));
    for (int64_t i = 0; i < hidden_; ++i)
        dz1[static_cast<size_t>(i)] = t.z1[static_cast<size_t>(i)] > 0.0 ? da1[static_cast<size_t>(i)] : 0.0;
    if (input_grad) input_grad->assign(static_cast<size_t>(in_dim_), 0.0);
    for (int64_t o = 0; o < hidden_; ++o) {
        const double d = dz1[static_cast<size_t>(o)];
        g.b1[static_cast<size_t>(o)] += d;
        if (d == 0.0) continue;
        double* gw = g.w1.data() + o * in_dim_;
        const float* w = w1_.data() + o * in_dim_;
        for (int64_t i = 0; i < in_dim_; ++i) {
            gw[i] += d * t.x[static_cast<size_t>(i)];
            if (input_grad) (*input_grad)[static_cast<size_t>(i)] += d * static_cast<double>(w[i]);
        }
    }
}

void Mlp::sgd_step(const Grads& g, double lr) {
    for (size_t i = 0; i < w1_.size(); ++i) w1_[i] -= static_cast<float>(lr * g.w1[i]);
    for (size_t i = 0; i < b1_.size(); ++i) b1_[i] -= static_cast<float>(lr * g.b1[i]);
    for (size_t i = 0; i < w2_.size(); ++i) w2_[i] -= static_cast<float>(lr * g.w2[i]);
    for (size_t i = 0; i < b2_.size(); ++i) b2_[i] -= static_cast<float>(lr * g.b2[i]);
    for (size_t i = 0; i < w3_.size(); ++i) w3_[i] -= static_cast<float>(lr * g.w3[i]);
    b3_ -= static_cast<float>(lr * g.b3);
}

void Mlp::soft_update_from(const Mlp& online, double tau) {
    const float t = static_cast<float>(tau);
    const float keep = 1.0f - t;
    for (size_t i = 0; i < w1_.size(); ++i) w1_[i] = t * online.w1_[i] + keep * w1_[i];
    for (size_t i = 0; i < b1_.size(); ++i) b1_[i] = t * online.b1_[i] + keep * b1_[i];
    for (size_t i = 0; i < w2_.size(); ++i) w2_[i] = t * online.w2_[i] + keep * w2_[i];
    for (size_t i = 0; i < b2_.size(); ++i) b2_[i] = t * online.b2_[i] + keep * b2_[i];
    for (size_t i = 0; i < w3_.size(); ++i) w3_[i] = t * online.w3_[i] + keep * w3_[i];
    b3_ = t * online.b3_ + keep * b3_;
}

std::vector<CheckpointEntry> Mlp::to_entries(const std::string& prefix) const {
    std::vector<CheckpointEntry> e;
    e.push_back(CheckpointEntry::ints(prefix + ".dims", {in_dim_, hidden_}));
    e.push_back(CheckpointEntry::floats(prefix + ".w1", {hidden_, in_dim_}, w1_));
    e.push_back(CheckpointEntry::floats(prefix + ".b1", {hidden_}, b1_));
    e.push_back(CheckpointEntry::floats(prefix + ".w2", {hidden_, hidden_}, w2_));
    e.push_back(CheckpointEntry::floats(prefix + ".b2", {hidden_}, b2_));
    e.push_back(CheckpointEntry::floats(prefix + ".w3", {hidden_}, w3_));
    e.push_back(CheckpointEntry::floats(prefix + ".b3", {1}, {b3_}));
    return e;
}

namespace {
const CheckpointEntry& entry_named(const std::vector<CheckpointEntry>& entries,
                                   const std::string& name) {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw std::runtime_error("agent state: missing entry '" + name + "'");
}
}  // namespace

Mlp Mlp::from_entries(const std::vector<CheckpointEntry>& entries, const std::string& prefix,
                      Head head) {
    Mlp m;
    const auto& dims = entry_named(entries, prefix + ".dims").i64;
    m.in_dim_ = dims.at(0);
    m.hidden_ = dims.at(1);
    m.head_ = head;
    m.w1_ = entry_named(entries, prefix + ".w1").f32;
    m.b1_ = entry_named(entries, prefix + ".b1").f32;
    m.w2_ = entry_named(entries, prefix + ".w2").f32;
    m.b2_ = entry_named(entries, prefix + ".b2").f32;
    m.w3_ = entry_named(entries, prefix + ".w3").f32;
    m.b3_ = entry_named(entries, prefix + ".b3").f32.at(0);
    return m;
}

bool mlps_equal(const Mlp& a, const Mlp& b) {
    return a.in_dim_ == b.in_dim_ && a.hidden_ == b.hidden_ && a.w1_ == b.w1_ && a.b1_ == b.b1_ &&
           a.w2_ == b.w2_ && a.b2_ == b.b2_ && a.w3_ == b.w3_ && a.b3_ == b.b3_;
}

DdpgAgent::DdpgAgent(const Config& cfg)
    : cfg_(cfg), buffer_(cfg.buffer_capacity), rng_(cfg.seed), sigma_(cfg.sigma0) {
    Rng init = rng_.fork();
    actor_ = Mlp(cfg.state_dim, cfg.hidden, Mlp::Head::Sigmoid, init);
    critic_ = Mlp(cfg.state_dim + 1, cfg.hidden, Mlp::Head::Linear, init);
    actor_target_ = actor_;
    critic_target_ = critic_;
}

double DdpgAgent::act(const std::vector<float>& state, double noise_sigma) {
    if (static_cast<int64_t>(state.size()) != cfg_.state_dim)
        throw std::invalid_argument("act: state dimension " + std::to_string(state.size()) +
                                    " does not match agent dimension " +
                                    std::to_string(cfg_.state_dim));
    double a = actor_.forward(state.data(), cfg_.state_dim);
    if (noise_sigma > 0.0) a += rng_.truncated_normal(noise_sigma, 2.0);
    return std::clamp(a, 0.0, 1.0);
}

DdpgAgent::UpdateResult DdpgAgent::update(int64_t batch_size, double gamma, double tau,
                                          double baseline) {
    UpdateResult res;
    if (buffer_.size() < batch_size) return res;  // skipped, signalled via `applied`
    res.applied = true;

    const std::vector<int64_t> batch = buffer_.sample_indices(batch_size, rng_);
    const double inv_b = 1.0 / static_cast<double>(batch_size);

    std::vector<float> sa(static_cast<size_t>(cfg_.state_dim + 1));

    // critic regression toward y = (r - baseline) + gamma * Q'(s', mu'(s')) * (1 - terminal)
    Mlp::Grads cg;
    cg.init_like(critic_);
    double loss = 0.0;
    for (int64_t bi : batch) {
        const Transition& t = buffer_.at(bi);
        double y = static_cast<double>(t.reward) - baseline;
        if (!t.terminal) {
            const double a2 = actor_target_.forward(t.next_state.data(), cfg_.state_dim);
            std::copy(t.next_state.begin(), t.next_state.end(), sa.begin());
            sa[static_cast<size_t>(cfg_.state_dim)] = static_cast<float>(a2);
            y += gamma * critic_target_.forward(sa.data(), cfg_.state_dim + 1);
        }
        std::copy(t.state.begin(), t.state.end(), sa.begin());
        sa[static_cast<size_t>(cfg_.state_dim)] = t.action;
        Mlp::Trace trace;
        const double q = critic_.forward(sa.data(), cfg_.state_dim + 1, &trace);
        const double err = q - y;
        loss += err * err * inv_b;
        critic_.backward(trace, 2.0 * err * inv_b, cg);
    }
    critic_.sgd_step(cg, cfg_.critic_lr);
    res.critic_loss = loss;

    // actor ascends mean Q(s, mu(s)) through the updated critic
    Mlp::Grads ag;
    ag.init_like(actor_);
    double objective = 0.0;
    std::vector<double> dq_dsa;
    for (int64_t bi : batch) {
        const Transition& t = buffer_.at(bi);
        Mlp::Trace atrace;
        const double a = actor_.forward(t.state.data(), cfg_.state_dim, &atrace);
        std::copy(t.state.begin(), t.state.end(), sa.begin());
        sa[static_cast<size_t>(cfg_.state_dim)] = static_cast<float>(a);
        Mlp::Trace ctrace;
        const double q = critic_.forward(sa.data(), cfg_.state_dim + 1, &ctrace);
        objective += q * inv_b;
        Mlp::Grads scratch;  // critic parameters are not updated here
        scratch.init_like(critic_);
        critic_.backward(ctrace, 1.0, scratch, &dq_dsa);
        const double dq_da = dq_dsa[static_cast<size_t>(cfg_.state_dim)];
        actor_.backward(atrace, -dq_da * inv_b, ag);  // minimize -Q
    }
    actor_.sgd_step(ag, cfg_.actor_lr);
    res.actor_objective = objective;

    actor_target_.soft_update_from(actor_, tau);
    critic_target_.soft_update_from(critic_, tau);
    return res;
}

void DdpgAgent::decay_noise(double factor) {
    if (factor <= 0.0 || factor > 1.0)
        throw std::invalid_argument("decay_noise: factor must be in (0,1]");
    sigma_ *= factor;
}

std::vector<CheckpointEntry> DdpgAgent::state_entries() const {
    std::vector<CheckpointEntry> e;
    auto add = [&](std::vector<CheckpointEntry> v) {
        for (auto& x : v) e.push_back(std::move(x));
    };
    add(actor_.to_entries("actor"));
    add(critic_.to_entries("critic"));
    add(actor_target_.to_entries("actor_target"));
    add(critic_target_.to_entries("critic_target"));
    e.push_back(CheckpointEntry::floats("sigma", {1}, {static_cast<float>(sigma_)}));
    return e;
}

void DdpgAgent::load_state_entries(const std::vector<CheckpointEntry>& entries) {
    actor_ = Mlp::from_entries(entries, "actor", Mlp::Head::Sigmoid);
    critic_ = Mlp::from_entries(entries, "critic", Mlp::Head::Linear);
    actor_target_ = Mlp::from_entries(entries, "actor_target", Mlp::Head::Sigmoid);
    critic_target_ = Mlp::from_entries(entries, "critic_target", Mlp::Head::Linear);
    sigma_ = entry_named(entries, "sigma").f32.at(0);
}

}  // namespace enprune
