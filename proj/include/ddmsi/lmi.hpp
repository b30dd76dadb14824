#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddmsi/data.hpp"

namespace ddmsi {

/// Thrown when a product of two affine expressions would be nonlinear.
class NonAffineError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Matrix whose entries are affine in a vector x of decision scalars:
///   M(x) = M0 + sum_j x_j M_j.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(Eigen::Index rows, Eigen::Index cols, int num_vars);

  static AffineMatrix constant(const Matrix& value, int num_vars);
  static AffineMatrix zero(Eigen::Index rows, Eigen::Index cols, int num_vars) {
    return {rows, cols, num_vars};
  }

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  int num_vars() const { return num_vars_; }

  const Matrix& constant_term() const { return constant_; }
  /// Nonzero coefficient matrices keyed by variable index.
  const std::map<int, Matrix>& terms() const { return terms_; }
  Matrix coefficient(int var) const;

  Matrix evaluate(const Vector& x) const;
  bool is_constant() const { return terms_.empty(); }

  AffineMatrix transpose() const;
  AffineMatrix block(Eigen::Index row, Eigen::Index col, Eigen::Index rows,
                     Eigen::Index cols) const;
  void set_block(Eigen::Index row, Eigen::Index col, const AffineMatrix& value);

  /// Adds `coeff` to the coefficient of variable `var`.
  void add_term(int var, const Matrix& coeff);

  AffineMatrix& operator+=(const AffineMatrix& rhs);
  AffineMatrix& operator-=(const AffineMatrix& rhs);
  AffineMatrix& operator*=(double s);

  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
  friend AffineMatrix operator-(AffineMatrix a) { return a *= -1.0; }
  friend AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }
  friend AffineMatrix operator*(const Matrix& L, const AffineMatrix& a);
  friend AffineMatrix operator*(const AffineMatrix& a, const Matrix& R);

  /// Product of two affine expressions. Every bilinear coefficient product
  /// must vanish exactly, otherwise NonAffineError is thrown.
  friend AffineMatrix operator*(const AffineMatrix& a, const AffineMatrix& b);

 private:
  void prune();

  int num_vars_ = 0;
  Matrix constant_;
  std::map<int, Matrix> terms_;
};

/// scalar (1x1 expression) times a constant matrix.
AffineMatrix scale(const AffineMatrix& scalar, const Matrix& M);
AffineMatrix block_diagonal(const std::vector<AffineMatrix>& blocks);

/// Ordered list of named blocks; resolves names to offsets.
class BlockLayout {
 public:
  BlockLayout() = default;
  BlockLayout(std::initializer_list<std::pair<std::string, Eigen::Index>> blocks);

  void add(std::string name, Eigen::Index size);
  Eigen::Index offset(const std::string& name) const;
  Eigen::Index size(const std::string& name) const;
  Eigen::Index total() const { return total_; }
  const std::vector<std::pair<std::string, Eigen::Index>>& blocks() const {
    return blocks_;
  }

 private:
  std::vector<std::pair<std::string, Eigen::Index>> blocks_;
  Eigen::Index total_ = 0;
};

/// Block matrix assembled from named row/column blocks.
class BlockBuilder {
 public:
  BlockBuilder(BlockLayout rows, BlockLayout cols, int num_vars);

  BlockBuilder& set(const std::string& row, const std::string& col,
                    const AffineMatrix& value);
  BlockBuilder& set(const std::string& row, const std::string& col,
                    const Matrix& value);
  BlockBuilder& identity(const std::string& row, const std::string& col,
                         double scale = 1.0);

  const AffineMatrix& matrix() const { return result_; }

 private:
  BlockLayout rows_;
  BlockLayout cols_;
  AffineMatrix result_;
};

enum class VariableKind { Scalar, Symmetric, Full };

struct VariableSpec {
  std::string name;
  int rows = 1;
  int cols = 1;
  VariableKind kind = VariableKind::Scalar;
  int offset = 0;  // first scalar index
  int count = 0;   // number of scalars
};

/// Registry of matrix-valued decision variables flattened into one vector.
class VariableSet {
 public:
  const VariableSpec& add(std::string name, int rows, int cols, VariableKind kind);
  const VariableSpec& add_scalar(std::string name) {
    return add(std::move(name), 1, 1, VariableKind::Scalar);
  }

  int num_scalars() const { return num_scalars_; }
  const std::vector<VariableSpec>& specs() const { return specs_; }
  const VariableSpec& spec(const std::string& name) const;
  bool contains(const std::string& name) const;

  /// Affine expression for the full matrix value of a variable. Only valid
  /// once every variable has been declared.
  AffineMatrix expr(const std::string& name) const;

  std::map<std::string, Matrix> unpack(const Vector& x) const;
  Vector pack(const std::map<std::string, Matrix>& values) const;

 private:
  std::vector<VariableSpec> specs_;
  int num_scalars_ = 0;
};

enum class Sense { NegativeDefinite, PositiveDefinite };

struct LmiConstraint {
  std::string name;
  AffineMatrix expr;
  Sense sense = Sense::NegativeDefinite;
  /// Hard constraints always hold with the requested margin; the solver's
  /// common strictness level only applies to the others.
  bool hard = false;
};

/// Set of strict matrix inequalities affine in the declared variables.
struct LmiProblem {
  VariableSet variables;
  std::vector<LmiConstraint> constraints;
  double h = 0.0;
  std::string tag;
  std::map<std::string, std::string> metadata;

  void add_constraint(std::string name, AffineMatrix expr, Sense sense, bool hard = false);

  /// Largest eigenvalue of each constraint, oriented so that satisfied
  /// constraints are negative (PositiveDefinite constraints are negated).
  std::vector<double> oriented_max_eigenvalues(const Vector& x) const;

  /// Checks F(v1) + F(v2) - F(v1 + v2) - F(0) = 0 entrywise (relative to the
  /// magnitude of the evaluations) on random points, and symmetry of every
  /// constraint. Returns the worst residual.
  double affinity_residual(std::uint64_t seed, int trials = 3) const;
  bool affinity_probe(std::uint64_t seed, double tol = 1e-10) const {
    return affinity_residual(seed) <= tol;
  }
};

/// Largest eigenvalue of a symmetric matrix (symmetrised first).
double max_eigenvalue(const Matrix& S);
double min_eigenvalue(const Matrix& S);

}  // namespace ddmsi
