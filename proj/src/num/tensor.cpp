#include "bioseq/num/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace bioseq::num {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->value = Buffer(num::numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    node->op = "leaf";
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::span<const float> values, bool requires_grad) {
    if (num::numel(shape) != values.size()) {
        throw std::invalid_argument("tensor: " + std::to_string(values.size()) + " values for shape " +
                                    shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->value = Buffer(values);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    node->op = "leaf";
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::initializer_list<float> values, bool requires_grad) {
    return from(std::move(shape), std::span<const float>(values.begin(), values.size()), requires_grad);
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw std::invalid_argument("rows(): expected 2-D tensor, got " + shape_str(shape()));
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw std::invalid_argument("cols(): expected 2-D tensor, got " + shape_str(shape()));
    return node_->shape[1];
}

float Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item(): tensor has " + std::to_string(numel()) + " elements");
    return node_->value[0];
}

Tensor Tensor::clone(bool requires_grad) const { return from(shape(), data(), requires_grad); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor make_op(const char* op, Shape shape, Buffer value, std::vector<Tensor> inputs, BackwardFn backward) {
    if (numel(shape) != value.size()) {
        throw std::logic_error(std::string(op) + ": value size does not match shape " + shape_str(shape));
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!std::isfinite(value[i])) {
            throw std::runtime_error(std::string(op) + ": non-finite output at element " + std::to_string(i));
        }
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    if (t_grad_enabled) {
        for (const auto& in : inputs) {
            if (in.defined() && in.requires_grad()) {
                if (in.node()->consumed) {
                    throw std::logic_error(std::string(op) + ": input graph was already consumed by backward()");
                }
                needs = true;
            }
        }
    }
    if (needs) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& in : inputs) node->inputs.push_back(in.shared());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

const Buffer* GradMap::find(const Node* n) const {
    auto it = grads_.find(n);
    return it == grads_.end() ? nullptr : &it->second;
}

std::vector<float> GradMap::at(const Tensor& t) const {
    const Buffer* g = find(t);
    if (g == nullptr) return std::vector<float>(t.numel(), 0.0f);
    return {g->span().begin(), g->span().end()};
}

void GradMap::accumulate(const GradMap& other) {
    for (const auto& [node, g] : other.grads_) {
        auto it = grads_.find(node);
        if (it == grads_.end()) {
            grads_.emplace(node, g);
        } else {
            float* dst = it->second.data();
            for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
        }
    }
}

void GradMap::insert(const Node* n, Buffer g) { grads_[n] = std::move(g); }

void GradMap::scale(float s) {
    for (auto& [node, g] : grads_) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
    }
}

GradMap backward(const Tensor& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward(): undefined tensor");
    if (loss.numel() != 1) {
        throw std::invalid_argument("backward(): loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    Node* root = loss.node();
    if (root->consumed) throw std::logic_error("backward(): graph already consumed; re-run the forward pass");
    if (!root->requires_grad) throw std::invalid_argument("backward(): loss does not depend on any gradient leaf");

    // Iterative post-order DFS gives a topological order (inputs first).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child != nullptr && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_map<Node*, Buffer> grads;
    grads.emplace(root, Buffer(1, 1.0f));
    GradMap leaves;
    std::vector<float*> slots;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        auto git = grads.find(node);
        if (git == grads.end()) continue;
        if (node->is_leaf()) {
            leaves.insert(node, std::move(git->second));
            grads.erase(git);
            continue;
        }
        slots.assign(node->inputs.size(), nullptr);
        for (std::size_t i = 0; i < node->inputs.size(); ++i) {
            Node* in = node->inputs[i].get();
            if (in == nullptr || !in->requires_grad) continue;
            auto [slot, inserted] = grads.try_emplace(in);
            if (inserted) slot->second = Buffer(in->value.size(), 0.0f);
            slots[i] = slot->second.data();
        }
        node->backward(*node, git->second.span(), slots);
        grads.erase(node);
    }

    for (Node* node : order) {
        if (!node->is_leaf()) {
            node->consumed = true;
            node->inputs.clear();
            node->backward = nullptr;
        }
    }
    return leaves;
}

}  // namespace bioseq::num
