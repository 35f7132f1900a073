#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "foregan/errors.hpp"

namespace foregan {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

class Tape;

namespace detail {

struct TensorData {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad; // empty until the first gradient write
    bool requires_grad = false;

    // Producer bookkeeping; set when an op records this tensor on a tape.
    Tape* tape = nullptr;
    std::uint64_t tape_gen = 0;
    std::int64_t node = -1;

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0f);
    }
};

} // namespace detail

// Dense f32 array. Written once by the op that produces it; parameter
// tensors are additionally mutated in place by optimizers between passes.
class Tensor {
  public:
    Tensor() : d_(std::make_shared<detail::TensorData>()) {}

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.d_->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0f);
        t.d_->shape = std::move(shape);
        return t;
    }

    static Tensor full(Shape shape, float v) {
        Tensor t;
        t.d_->data.assign(static_cast<std::size_t>(shape_numel(shape)), v);
        t.d_->shape = std::move(shape);
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<float> data) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw DimensionError("Tensor: shape " + shape_str(shape) + " does not match " +
                                 std::to_string(data.size()) + " values");
        Tensor t;
        t.d_->shape = std::move(shape);
        t.d_->data = std::move(data);
        return t;
    }

    static Tensor scalar(float v) { return full({1}, v); }

    const Shape& shape() const { return d_->shape; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    std::int64_t dim(int i) const { return d_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(d_->data.size()); }

    std::span<const float> data() const { return d_->data; }
    // For leaf initialization and optimizer updates; never call on op outputs.
    std::span<float> mutable_data() { return d_->data; }

    float item() const {
        if (numel() != 1)
            throw ContractError("item: tensor has shape " + shape_str(shape()) + ", expected a scalar");
        return d_->data[0];
    }

    bool requires_grad() const { return d_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        d_->requires_grad = v;
        return *this;
    }

    bool has_grad() const { return !d_->grad.empty(); }
    std::span<const float> grad() const {
        if (d_->grad.empty())
            throw ContractError("grad: no gradient has been computed for this tensor");
        return d_->grad;
    }
    void zero_grad() { d_->grad.clear(); }

    // Deep copy of the values as a fresh untracked leaf.
    Tensor clone() const {
        Tensor t;
        t.d_->shape = d_->shape;
        t.d_->data = d_->data;
        return t;
    }

    bool same_storage(const Tensor& other) const { return d_ == other.d_; }

    detail::TensorData* impl() const { return d_.get(); }
    const std::shared_ptr<detail::TensorData>& handle() const { return d_; }

  private:
    std::shared_ptr<detail::TensorData> d_;
};

// Wengert list: ordered record of executed ops. backward() replays the
// recorded closures in exact reverse execution order. A tape is activated
// for the current thread via Tape::Scope; ops record only while a tape is
// active and some input requires gradients.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void clear() {
        nodes_.clear();
        ++generation_;
    }

    std::size_t size() const { return nodes_.size(); }
    std::uint64_t generation() const { return generation_; }

    std::int64_t record(std::function<void()> backward_fn) {
        nodes_.push_back(std::move(backward_fn));
        return static_cast<std::int64_t>(nodes_.size()) - 1;
    }

    void run_backward_from(std::int64_t node) {
        for (std::int64_t i = node; i >= 0; --i) nodes_[static_cast<std::size_t>(i)]();
    }

    class Scope {
      public:
        explicit Scope(Tape& t) : prev_(current_ptr()) { current_ptr() = &t; }
        ~Scope() { current_ptr() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

      private:
        Tape* prev_;
    };

    // Deactivates recording for the current thread (inference forwards).
    class NoGradScope {
      public:
        NoGradScope() : prev_(current_ptr()) { current_ptr() = nullptr; }
        ~NoGradScope() { current_ptr() = prev_; }
        NoGradScope(const NoGradScope&) = delete;
        NoGradScope& operator=(const NoGradScope&) = delete;

      private:
        Tape* prev_;
    };

    static Tape* current() { return current_ptr(); }

  private:
    static Tape*& current_ptr() {
        thread_local Tape* cur = nullptr;
        return cur;
    }

    std::vector<std::function<void()>> nodes_;
    std::uint64_t generation_ = 0;
};

namespace detail {

// Marks `out` as produced by the currently recording tape node.
inline void mark_recorded(Tensor& out, std::function<void()> backward_fn) {
    Tape* t = Tape::current();
    TensorData* od = out.impl();
    od->requires_grad = true;
    od->tape = t;
    od->tape_gen = t->generation();
    od->node = t->record(std::move(backward_fn));
}

inline bool recording(std::initializer_list<const Tensor*> inputs) {
    if (Tape::current() == nullptr) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

} // namespace detail

// Seeds d(loss)/d(loss) = 1 and propagates gradients to every tensor with
// requires_grad reachable below `loss`. Gradients accumulate additively
// across multiple uses of a tensor; call zero_grad between passes.
inline void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    detail::TensorData* td = loss.impl();
    if (td->tape == nullptr || td->node < 0 || td->tape_gen != td->tape->generation())
        throw ContractError("backward: loss is not attached to a live tape (empty tape)");
    td->ensure_grad();
    td->grad[0] += 1.0f;
    td->tape->run_backward_from(td->node);
}

} // namespace foregan
