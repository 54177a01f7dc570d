#include "adasti/tensor.hpp"

#include <cmath>
#include <sstream>

namespace adasti {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

void Tensor::add_(const Tensor& o) {
    require(o.size() == size(), "Tensor::add_: size mismatch " + shape_str(shape_) + " vs " + shape_str(o.shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
}

void Tensor::scale_(double s) {
    for (auto& v : data_) v *= s;
}

double Tensor::norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace adasti
