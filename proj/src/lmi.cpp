#include "ddmsi/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ddmsi {

namespace {

void require_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

AffineMatrix::AffineMatrix(Eigen::Index rows, Eigen::Index cols, int num_vars)
    : num_vars_(num_vars), constant_(Matrix::Zero(rows, cols)) {}

AffineMatrix AffineMatrix::constant(const Matrix& value, int num_vars) {
  AffineMatrix out(value.rows(), value.cols(), num_vars);
  out.constant_ = value;
  return out;
}

Matrix AffineMatrix::coefficient(int var) const {
  auto it = terms_.find(var);
  return it == terms_.end() ? Matrix::Zero(rows(), cols()) : it->second;
}

Matrix AffineMatrix::evaluate(const Vector& x) const {
  require_shape(x.size() == num_vars_, "AffineMatrix::evaluate: wrong length");
  Matrix out = constant_;
  for (const auto& [var, coeff] : terms_) out += x(var) * coeff;
  return out;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix out(cols(), rows(), num_vars_);
  out.constant_ = constant_.transpose();
  for (const auto& [var, coeff] : terms_) out.terms_.emplace(var, coeff.transpose());
  return out;
}

AffineMatrix AffineMatrix::block(Eigen::Index row, Eigen::Index col,
                                 Eigen::Index r, Eigen::Index c) const {
  AffineMatrix out(r, c, num_vars_);
  out.constant_ = constant_.block(row, col, r, c);
  for (const auto& [var, coeff] : terms_) {
    out.terms_.emplace(var, coeff.block(row, col, r, c));
  }
  out.prune();
  return out;
}

void AffineMatrix::set_block(Eigen::Index row, Eigen::Index col,
                             const AffineMatrix& value) {
  require_shape(value.num_vars_ == num_vars_, "set_block: variable count mismatch");
  require_shape(row + value.rows() <= rows() && col + value.cols() <= cols(),
                "set_block: block out of range");
  constant_.block(row, col, value.rows(), value.cols()) = value.constant_;
  for (auto& [var, coeff] : terms_) {
    coeff.block(row, col, value.rows(), value.cols()).setZero();
  }
  for (const auto& [var, coeff] : value.terms_) {
    auto [it, inserted] = terms_.try_emplace(var, Matrix::Zero(rows(), cols()));
    it->second.block(row, col, value.rows(), value.cols()) = coeff;
  }
  prune();
}

void AffineMatrix::add_term(int var, const Matrix& coeff) {
  require_shape(var >= 0 && var < num_vars_, "add_term: variable index out of range");
  require_shape(coeff.rows() == rows() && coeff.cols() == cols(),
                "add_term: coefficient shape mismatch");
  auto [it, inserted] = terms_.try_emplace(var, Matrix::Zero(rows(), cols()));
  it->second += coeff;
  prune();
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& rhs) {
  require_shape(rows() == rhs.rows() && cols() == rhs.cols() &&
                    num_vars_ == rhs.num_vars_,
                "AffineMatrix: shape mismatch in sum");
  constant_ += rhs.constant_;
  for (const auto& [var, coeff] : rhs.terms_) {
    auto [it, inserted] = terms_.try_emplace(var, Matrix::Zero(rows(), cols()));
    it->second += coeff;
  }
  prune();
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& rhs) {
  return *this += -1.0 * rhs;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
  constant_ *= s;
  for (auto& [var, coeff] : terms_) coeff *= s;
  prune();
  return *this;
}

AffineMatrix operator*(const Matrix& L, const AffineMatrix& a) {
  require_shape(L.cols() == a.rows(), "AffineMatrix: shape mismatch in product");
  AffineMatrix out(L.rows(), a.cols(), a.num_vars_);
  out.constant_ = L * a.constant_;
  for (const auto& [var, coeff] : a.terms_) out.terms_.emplace(var, L * coeff);
  out.prune();
  return out;
}

AffineMatrix operator*(const AffineMatrix& a, const Matrix& R) {
  require_shape(a.cols() == R.rows(), "AffineMatrix: shape mismatch in product");
  AffineMatrix out(a.rows(), R.cols(), a.num_vars_);
  out.constant_ = a.constant_ * R;
  for (const auto& [var, coeff] : a.terms_) out.terms_.emplace(var, coeff * R);
  out.prune();
  return out;
}

AffineMatrix operator*(const AffineMatrix& a, const AffineMatrix& b) {
  require_shape(a.num_vars_ == b.num_vars_, "AffineMatrix: variable count mismatch");
  for (const auto& [va, ca] : a.terms_) {
    for (const auto& [vb, cb] : b.terms_) {
      const Matrix cross = ca * cb;
      if (cross.size() > 0 && cross.cwiseAbs().maxCoeff() != 0.0) {
        std::ostringstream os;
        os << "product is not affine: variables " << va << " and " << vb
           << " multiply";
        throw NonAffineError(os.str());
      }
    }
  }
  AffineMatrix out = a.constant_ * b;
  out += a * b.constant_;
  out.constant_ -= a.constant_ * b.constant_;
  return out;
}

AffineMatrix scale(const AffineMatrix& scalar, const Matrix& M) {
  require_shape(scalar.rows() == 1 && scalar.cols() == 1,
                "scale: first argument must be 1x1");
  AffineMatrix out = AffineMatrix::constant(scalar.constant_term()(0, 0) * M,
                                            scalar.num_vars());
  for (const auto& [var, coeff] : scalar.terms()) out.add_term(var, coeff(0, 0) * M);
  return out;
}

AffineMatrix block_diagonal(const std::vector<AffineMatrix>& blocks) {
  require_shape(!blocks.empty(), "block_diagonal: no blocks");
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  AffineMatrix out(rows, cols, blocks.front().num_vars());
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.set_block(r, c, b);
    r += b.rows();
    c += b.cols();
  }
  return out;
}

void AffineMatrix::prune() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->second.size() == 0 || it->second.cwiseAbs().maxCoeff() == 0.0) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
}

BlockLayout::BlockLayout(
    std::initializer_list<std::pair<std::string, Eigen::Index>> blocks) {
  for (const auto& [name, size] : blocks) add(name, size);
}

void BlockLayout::add(std::string name, Eigen::Index size) {
  require_shape(size >= 0, "BlockLayout: negative block size");
  for (const auto& b : blocks_) {
    require_shape(b.first != name, "BlockLayout: duplicate block name");
  }
  blocks_.emplace_back(std::move(name), size);
  total_ += size;
}

Eigen::Index BlockLayout::offset(const std::string& name) const {
  Eigen::Index off = 0;
  for (const auto& [block, size] : blocks_) {
    if (block == name) return off;
    off += size;
  }
  throw std::out_of_range("BlockLayout: unknown block '" + name + "'");
}

Eigen::Index BlockLayout::size(const std::string& name) const {
  for (const auto& [block, size] : blocks_) {
    if (block == name) return size;
  }
  throw std::out_of_range("BlockLayout: unknown block '" + name + "'");
}

BlockBuilder::BlockBuilder(BlockLayout rows, BlockLayout cols, int num_vars)
    : rows_(std::move(rows)),
      cols_(std::move(cols)),
      result_(rows_.total(), cols_.total(), num_vars) {}

BlockBuilder& BlockBuilder::set(const std::string& row, const std::string& col,
                                const AffineMatrix& value) {
  if (value.rows() != rows_.size(row) || value.cols() != cols_.size(col)) {
    std::ostringstream os;
    os << "BlockBuilder: block (" << row << ", " << col << ") expects "
       << rows_.size(row) << "x" << cols_.size(col) << ", got " << value.rows()
       << "x" << value.cols();
    throw std::invalid_argument(os.str());
  }
  result_.set_block(rows_.offset(row), cols_.offset(col), value);
  return *this;
}

BlockBuilder& BlockBuilder::set(const std::string& row, const std::string& col,
                                const Matrix& value) {
  return set(row, col, AffineMatrix::constant(value, result_.num_vars()));
}

BlockBuilder& BlockBuilder::identity(const std::string& row,
                                     const std::string& col, double scale) {
  const auto r = rows_.size(row);
  require_shape(r == cols_.size(col), "BlockBuilder: identity block not square");
  return set(row, col, Matrix(scale * Matrix::Identity(r, r)));
}

const VariableSpec& VariableSet::add(std::string name, int rows, int cols,
                                     VariableKind kind) {
  require_shape(!contains(name), "VariableSet: duplicate variable");
  require_shape(rows >= 0 && cols >= 0, "VariableSet: negative shape");
  VariableSpec spec;
  spec.name = std::move(name);
  spec.rows = rows;
  spec.cols = cols;
  spec.kind = kind;
  spec.offset = num_scalars_;
  switch (kind) {
    case VariableKind::Scalar:
      require_shape(rows == 1 && cols == 1, "VariableSet: scalar must be 1x1");
      spec.count = 1;
      break;
    case VariableKind::Symmetric:
      require_shape(rows == cols, "VariableSet: symmetric variable must be square");
      spec.count = rows * (rows + 1) / 2;
      break;
    case VariableKind::Full:
      spec.count = rows * cols;
      break;
  }
  num_scalars_ += spec.count;
  specs_.push_back(std::move(spec));
  return specs_.back();
}

bool VariableSet::contains(const std::string& name) const {
  return std::any_of(specs_.begin(), specs_.end(),
                     [&](const VariableSpec& s) { return s.name == name; });
}

const VariableSpec& VariableSet::spec(const std::string& name) const {
  for (const auto& s : specs_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("VariableSet: unknown variable '" + name + "'");
}

AffineMatrix VariableSet::expr(const std::string& name) const {
  const VariableSpec& s = spec(name);
  AffineMatrix out(s.rows, s.cols, num_scalars_);
  int idx = s.offset;
  if (s.kind == VariableKind::Symmetric) {
    for (int j = 0; j < s.cols; ++j) {
      for (int i = j; i < s.rows; ++i) {
        Matrix E = Matrix::Zero(s.rows, s.cols);
        E(i, j) = 1.0;
        E(j, i) = 1.0;
        out.add_term(idx++, E);
      }
    }
  } else {
    for (int j = 0; j < s.cols; ++j) {
      for (int i = 0; i < s.rows; ++i) {
        Matrix E = Matrix::Zero(s.rows, s.cols);
        E(i, j) = 1.0;
        out.add_term(idx++, E);
      }
    }
  }
  return out;
}

std::map<std::string, Matrix> VariableSet::unpack(const Vector& x) const {
  require_shape(x.size() == num_scalars_, "VariableSet::unpack: wrong length");
  std::map<std::string, Matrix> out;
  for (const auto& s : specs_) {
    out.emplace(s.name, expr(s.name).evaluate(x));
  }
  return out;
}

Vector VariableSet::pack(const std::map<std::string, Matrix>& values) const {
  Vector x = Vector::Zero(num_scalars_);
  for (const auto& s : specs_) {
    auto it = values.find(s.name);
    if (it == values.end()) {
      throw std::invalid_argument("VariableSet::pack: missing value for " + s.name);
    }
    const Matrix& v = it->second;
    require_shape(v.rows() == s.rows && v.cols() == s.cols,
                  "VariableSet::pack: shape mismatch");
    int idx = s.offset;
    if (s.kind == VariableKind::Symmetric) {
      for (int j = 0; j < s.cols; ++j) {
        for (int i = j; i < s.rows; ++i) x(idx++) = 0.5 * (v(i, j) + v(j, i));
      }
    } else {
      for (int j = 0; j < s.cols; ++j) {
        for (int i = 0; i < s.rows; ++i) x(idx++) = v(i, j);
      }
    }
  }
  return x;
}

void LmiProblem::add_constraint(std::string name, AffineMatrix expr, Sense sense,
                                bool hard) {
  require_shape(expr.rows() == expr.cols(), "LmiProblem: constraint must be square");
  require_shape(expr.num_vars() == variables.num_scalars(),
                "LmiProblem: constraint built against a different variable set");
  constraints.push_back({std::move(name), std::move(expr), sense, hard});
}

double max_eigenvalue(const Matrix& S) {
  if (S.size() == 0) return -std::numeric_limits<double>::infinity();
  const Matrix sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double min_eigenvalue(const Matrix& S) {
  if (S.size() == 0) return std::numeric_limits<double>::infinity();
  const Matrix sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

std::vector<double> LmiProblem::oriented_max_eigenvalues(const Vector& x) const {
  std::vector<double> out;
  out.reserve(constraints.size());
  for (const auto& c : constraints) {
    const Matrix value = c.expr.evaluate(x);
    out.push_back(c.sense == Sense::NegativeDefinite ? max_eigenvalue(value)
                                                     : -min_eigenvalue(value));
  }
  return out;
}

double LmiProblem::affinity_residual(std::uint64_t seed, int trials) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int p = variables.num_scalars();
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vector v1(p);
    Vector v2(p);
    for (int i = 0; i < p; ++i) {
      v1(i) = normal(rng);
      v2(i) = normal(rng);
    }
    for (const auto& c : constraints) {
      const Matrix f1 = c.expr.evaluate(v1);
      const Matrix f2 = c.expr.evaluate(v2);
      const Matrix f12 = c.expr.evaluate(v1 + v2);
      const Matrix f0 = c.expr.evaluate(Vector::Zero(p));
      const double scale = std::max(
          {1.0, f1.cwiseAbs().maxCoeff(), f2.cwiseAbs().maxCoeff(),
           f12.cwiseAbs().maxCoeff(), f0.cwiseAbs().maxCoeff()});
      worst = std::max(worst, (f1 + f2 - f12 - f0).cwiseAbs().maxCoeff() / scale);
      worst = std::max(worst, (f1 - f1.transpose()).cwiseAbs().maxCoeff() / scale);
    }
  }
  return worst;
}

}  // namespace ddmsi
