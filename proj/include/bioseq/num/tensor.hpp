#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bioseq/num/buffer.hpp"

namespace bioseq::num {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;

// Receives the upstream gradient of a node and accumulates into the gradient
// slots of its inputs. A slot is null when that input needs no gradient.
using BackwardFn =
    std::function<void(const Node& self, std::span<const float> grad, std::span<float* const> input_grads)>;

struct Node {
    Shape shape;
    Buffer value;
    bool requires_grad = false;
    bool consumed = false;
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn backward;
    std::string op;

    bool is_leaf() const { return !backward; }
};

// Handle to a node of a define-by-run graph. Copies share the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from(Shape shape, std::span<const float> values, bool requires_grad = false);
    static Tensor from(Shape shape, std::initializer_list<float> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const float> data() const { return node_->value.span(); }
    // Direct write access, intended for initialization and optimizer updates
    // of leaf tensors.
    std::span<float> mutable_data() { return node_->value.span(); }
    float item() const;
    float at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

    bool requires_grad() const { return node_->requires_grad; }
    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& shared() const { return node_; }

    // Detached deep copy (new leaf).
    Tensor clone(bool requires_grad = false) const;
    std::vector<float> to_vector() const { return {data().begin(), data().end()}; }

private:
    std::shared_ptr<Node> node_;
};

// Gradient recording toggle for the calling thread.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Builds the result of an op. Rejects non-finite values. Records the inputs
// and backward rule only when grad mode is on and some input needs a gradient.
Tensor make_op(const char* op, Shape shape, Buffer value, std::vector<Tensor> inputs, BackwardFn backward);

// Leaf gradients produced by one backward pass, keyed by the leaf node.
class GradMap {
public:
    const Buffer* find(const Tensor& t) const { return find(t.node()); }
    const Buffer* find(const Node* n) const;
    std::vector<float> at(const Tensor& t) const;
    std::size_t size() const { return grads_.size(); }

    // Adds other's gradients into this map (element-wise).
    void accumulate(const GradMap& other);
    void insert(const Node* n, Buffer g);
    void scale(float s);

    const std::unordered_map<const Node*, Buffer>& entries() const { return grads_; }

private:
    std::unordered_map<const Node*, Buffer> grads_;
};

// Reverse-mode pass from a scalar loss. Consumes the graph: every interior
// node is detached afterwards and a second call on the same loss throws.
GradMap backward(const Tensor& loss);

}  // namespace bioseq::num
