#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace stdown::ad {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major tensor of doubles, rank <= 4. Storage is shared so
// reshape is O(1); values in a graph are treated as immutable once built.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)),
          store_(std::make_shared<std::vector<double>>(shape_numel(shape_), 0.0)) {
        check_rank();
    }

    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), store_(std::make_shared<std::vector<double>>(std::move(data))) {
        check_rank();
        if (static_cast<std::int64_t>(store_->size()) != shape_numel(shape_))
            throw std::invalid_argument("tensor data length " + std::to_string(store_->size()) +
                                        " does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : *t.store_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return full({1}, v); }

    bool empty() const { return !store_; }
    const Shape& shape() const { return shape_; }
    std::int64_t size() const { return store_ ? static_cast<std::int64_t>(store_->size()) : 0; }
    std::int64_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const { return shape_.size(); }

    double* data() { return store_->data(); }
    const double* data() const { return store_->data(); }
    double& operator[](std::int64_t i) { return (*store_)[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return (*store_)[static_cast<std::size_t>(i)]; }

    double item() const {
        if (size() != 1) throw std::invalid_argument("item() on tensor of size " + std::to_string(size()));
        return (*store_)[0];
    }

    // Same storage, new shape.
    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != size())
            throw std::invalid_argument("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                                        " changes element count");
        Tensor t;
        t.shape_ = std::move(shape);
        t.store_ = store_;
        t.check_rank();
        return t;
    }

    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.store_ = std::make_shared<std::vector<double>>(*store_);
        return t;
    }

    void fill(double v) {
        for (auto& x : *store_) x = v;
    }

private:
    void check_rank() const {
        if (shape_.size() > 4) throw std::invalid_argument("tensor rank > 4: " + shape_str(shape_));
        for (auto d : shape_)
            if (d < 0) throw std::invalid_argument("negative dimension in " + shape_str(shape_));
    }

    Shape shape_;
    std::shared_ptr<std::vector<double>> store_;
};

}  // namespace stdown::ad
