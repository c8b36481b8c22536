/*
 Copyright 2026 The hullguard Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "hullguard/lmi.hpp"

#include <sstream>

namespace hullguard::lmi {

namespace {

std::string shape(Eigen::Index r, Eigen::Index c)
{
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

}  // namespace

AffineMatrix::AffineMatrix(Eigen::MatrixXd constant) : constant_(std::move(constant)) {}

AffineMatrix AffineMatrix::zeros(Eigen::Index rows, Eigen::Index cols)
{
  return AffineMatrix(Eigen::MatrixXd::Zero(rows, cols));
}

AffineMatrix AffineMatrix::identity(Eigen::Index n) { return AffineMatrix(Eigen::MatrixXd::Identity(n, n)); }

AffineMatrix AffineMatrix::scalar(double value) { return AffineMatrix(Eigen::MatrixXd::Constant(1, 1, value)); }

void AffineMatrix::adopt_owner(std::size_t other)
{
  if (other == 0) return;
  if (owner_ != 0 && owner_ != other) {
    throw AssemblyError("expression mixes variables of two different problems");
  }
  owner_ = other;
}

AffineMatrix AffineMatrix::transpose() const
{
  AffineMatrix out(constant_.transpose());
  out.owner_ = owner_;
  for (const auto& [k, c] : terms_) out.terms_.emplace(k, c.transpose());
  return out;
}

AffineMatrix AffineMatrix::block(Eigen::Index row, Eigen::Index col, Eigen::Index rows, Eigen::Index cols) const
{
  if (row < 0 || col < 0 || row + rows > this->rows() || col + cols > this->cols()) {
    throw AssemblyError("block " + shape(rows, cols) + " out of range of " + shape(this->rows(), this->cols()));
  }
  AffineMatrix out(constant_.block(row, col, rows, cols));
  out.owner_ = owner_;
  for (const auto& [k, c] : terms_) {
    Eigen::MatrixXd b = c.block(row, col, rows, cols);
    if (!b.isZero(0.0)) out.terms_.emplace(k, std::move(b));
  }
  return out;
}

Eigen::MatrixXd AffineMatrix::evaluate(const Eigen::VectorXd& coords) const
{
  Eigen::MatrixXd out = constant_;
  for (const auto& [k, c] : terms_) {
    if (k >= coords.size()) throw AssemblyError("coordinate vector too short for expression");
    out.noalias() += coords(k) * c;
  }
  return out;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& rhs)
{
  if (rows() != rhs.rows() || cols() != rhs.cols()) {
    throw AssemblyError("dimension mismatch in sum: " + shape(rows(), cols()) + " + " +
                        shape(rhs.rows(), rhs.cols()));
  }
  adopt_owner(rhs.owner_);
  constant_ += rhs.constant_;
  for (const auto& [k, c] : rhs.terms_) {
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      terms_.emplace(k, c);
    } else {
      it->second += c;
    }
  }
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& rhs) { return *this += (-1.0) * rhs; }

AffineMatrix& AffineMatrix::operator*=(double s)
{
  constant_ *= s;
  for (auto& [k, c] : terms_) c *= s;
  return *this;
}

AffineMatrix operator*(const Eigen::MatrixXd& lhs, const AffineMatrix& rhs)
{
  if (lhs.cols() != rhs.rows()) {
    throw AssemblyError("dimension mismatch in product: " + shape(lhs.rows(), lhs.cols()) + " * " +
                        shape(rhs.rows(), rhs.cols()));
  }
  AffineMatrix out(lhs * rhs.constant_);
  out.owner_ = rhs.owner_;
  for (const auto& [k, c] : rhs.terms_) out.terms_.emplace(k, lhs * c);
  return out;
}

AffineMatrix operator*(const AffineMatrix& lhs, const Eigen::MatrixXd& rhs)
{
  if (lhs.cols() != rhs.rows()) {
    throw AssemblyError("dimension mismatch in product: " + shape(lhs.rows(), lhs.cols()) + " * " +
                        shape(rhs.rows(), rhs.cols()));
  }
  AffineMatrix out(lhs.constant_ * rhs);
  out.owner_ = lhs.owner_;
  for (const auto& [k, c] : lhs.terms_) out.terms_.emplace(k, c * rhs);
  return out;
}

AffineMatrix trace(const AffineMatrix& m)
{
  if (m.rows() != m.cols()) throw AssemblyError("trace of a non-square expression");
  AffineMatrix acc = AffineMatrix::scalar(0.0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    acc += m.block(i, i, 1, 1);
  }
  return acc;
}

}  // namespace hullguard::lmi
