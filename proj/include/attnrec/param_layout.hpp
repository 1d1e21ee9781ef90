#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "attnrec/numkit.hpp"

namespace attnrec {

// Named row-major blocks packed back to back in one flat vector. Models keep
// their parameters and gradients as flat vectors so that the optimizer, the
// clipper and the gradient checker all work on a single Vector.
class ParamLayout {
 public:
  struct Block {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;
    Eigen::Index size() const { return rows * cols; }
  };

  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    blocks_.push_back(Block{std::move(name), rows, cols, size_});
    size_ += rows * cols;
    return blocks_.size() - 1;
  }

  Eigen::Index size() const { return size_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& block(std::size_t i) const { return blocks_.at(i); }

  template <typename Scalar>
  MatrixMap<Scalar> map(std::size_t i, Vector<Scalar>& flat) const {
    const Block& b = blocks_[i];
    return MatrixMap<Scalar>(flat.data() + b.offset, b.rows, b.cols);
  }
  template <typename Scalar>
  ConstMatrixMap<Scalar> map(std::size_t i, const Vector<Scalar>& flat) const {
    const Block& b = blocks_[i];
    return ConstMatrixMap<Scalar>(flat.data() + b.offset, b.rows, b.cols);
  }

  bool operator==(const ParamLayout& o) const {
    if (size_ != o.size_ || blocks_.size() != o.blocks_.size()) return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (blocks_[i].rows != o.blocks_[i].rows || blocks_[i].cols != o.blocks_[i].cols) return false;
    }
    return true;
  }

 private:
  std::vector<Block> blocks_;
  Eigen::Index size_ = 0;
};

}  // namespace attnrec
