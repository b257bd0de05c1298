#pragma once

#include <cstdint>
#include <vector>

#include "enprune/checkpoint.hpp"
#include "enprune/rng.hpp"
#include "enprune/tensor.hpp"

namespace enprune {

struct Transition {
    std::vector<float> state;
    float action = 0.0f;
    float reward = 0.0f;
    std::vector<float> next_state;
    bool terminal = false;
};

// Ring buffer with seedable batch sampling (without replacement).
class ReplayBuffer {
public:
    explicit ReplayBuffer(int64_t capacity) : capacity_(capacity) {}

    void push(Transition t);
    int64_t size() const { return static_cast<int64_t>(items_.size()); }
    const Transition& at(int64_t i) const { return items_[static_cast<size_t>(i)]; }
    // `i` counts from the oldest retained transition.
    std::vector<int64_t> sample_indices(int64_t batch, Rng& rng) const;

private:
    int64_t capacity_;
    int64_t head_ = 0;  // oldest element when full
    std::vector<Transition> items_;
};

// Two 300-unit rectifier hidden layers; scalar output, optionally squashed by
// a logistic sigmoid (policy head).
class Mlp {
public:
    enum class Head { Linear, Sigmoid };

    Mlp() = default;
    Mlp(int64_t in_dim, int64_t hidden, Head head, Rng& rng);

    struct Trace {
        std::vector<double> x, z1, a1, z2, a2;
        double z3 = 0.0, out = 0.0;
    };
    double forward(const float* x, int64_t n, Trace* trace = nullptr) const;

    struct Grads {
        std::vector<double> w1, b1, w2, b2, w3;
        double b3 = 0.0;
        void init_like(const Mlp& m);
    };
    // Accumulates parameter gradients for d(loss)/d(out) = upstream; optionally
    // returns d(loss)/d(input).
    void backward(const Trace& t, double upstream, Grads& g,
                  std::vector<double>* input_grad = nullptr) const;

    void sgd_step(const Grads& g, double lr);  // theta -= lr * g
    void soft_update_from(const Mlp& online, double tau);

    int64_t input_dim() const { return in_dim_; }
    std::vector<CheckpointEntry> to_entries(const std::string& prefix) const;
    static Mlp from_entries(const std::vector<CheckpointEntry>& entries,
                            const std::string& prefix, Head head);

private:
    int64_t in_dim_ = 0, hidden_ = 0;
    Head head_ = Head::Linear;
    std::vector<float> w1_, b1_, w2_, b2_, w3_;
    float b3_ = 0.0f;
    friend bool mlps_equal(const Mlp& a, const Mlp& b);
};

bool mlps_equal(const Mlp& a, const Mlp& b);

// DDPG actor-critic over a continuous action in [0,1].
class DdpgAgent {
public:
    struct Config {
        int64_t state_dim = 11;
        int64_t hidden = 300;
        double actor_lr = 1e-4;
        double critic_lr = 1e-3;
        int64_t buffer_capacity = 2000;
        double sigma0 = 0.5;
        uint64_t seed = 1;
    };

    explicit DdpgAgent(const Config& cfg);

    // clamp(policy(state) + eps, 0, 1); eps ~ N(0, sigma) truncated at 2 sigma.
    // sigma 0 draws nothing from the noise stream.
    double act(const std::vector<float>& state, double noise_sigma);
    double act(const std::vector<float>& state) { return act(state, sigma_); }

    void remember(Transition t) { buffer_.push(std::move(t)); }

    struct UpdateResult {
        bool applied = false;  // false when the buffer is too small (not an error)
        double critic_loss = 0.0;
        double actor_objective = 0.0;
    };
    UpdateResult update(int64_t batch_size, double gamma, double tau, double baseline);

    void decay_noise(double factor);
    double sigma() const { return sigma_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const Mlp& policy() const { return actor_; }

    std::vector<CheckpointEntry> state_entries() const;
    void load_state_entries(const std::vector<CheckpointEntry>& entries);

private:
    Config cfg_;
    Mlp actor_, critic_, actor_target_, critic_target_;
    ReplayBuffer buffer_;
    Rng rng_;
    double sigma_;
};

}  // namespace enprune
