#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "risres/types.hpp"

namespace risres::conic {

/// Sparse affine function sum_j coeff_j x_{index_j} + constant.
struct AffineExpr {
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    AffineExpr() = default;
    explicit AffineExpr(double c) : constant(c) {}

    AffineExpr& add(int index, double coeff);
    AffineExpr& operator+=(const AffineExpr& other);
    AffineExpr& operator*=(double s);
    /// Merges duplicate indices and drops exact zeros.
    void compress();
    [[nodiscard]] double evaluate(const RVec& x) const;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator*(double s, AffineExpr a);

enum class ConeKind {
    Zero,          // every row == 0
    Nonnegative,   // every row >= 0
    SecondOrder,   // row0 >= ||(row1, ..., row_{d-1})||
    Exponential,   // (x, y, z): y exp(x / y) <= z, y > 0
};

const char* cone_tag(ConeKind kind);

struct ConeBlock {
    ConeKind kind = ConeKind::Nonnegative;
    std::vector<AffineExpr> rows;
    std::string name;
};

/// minimize c^T x + c0 subject to every block's rows lying in its cone and
/// lower <= x <= upper.
struct ConicProgram {
    int num_vars = 0;
    std::vector<std::string> var_names;
    RVec objective;
    double objective_constant = 0.0;
    std::vector<ConeBlock> blocks;
    RVec lower;
    RVec upper;
    /// Optional starting point; need not be feasible.
    RVec initial_point;

    /// Appends a variable and returns its index.
    int add_variable(std::string name, double lb = -std::numeric_limits<double>::infinity(),
                     double ub = std::numeric_limits<double>::infinity());
    ConeBlock& add_block(ConeKind kind, std::string name);
    void add_objective(const AffineExpr& e);

    [[nodiscard]] double objective_value(const RVec& x) const;
    [[nodiscard]] int count_rows() const;
};

struct Diagnostics {
    bool valid = true;
    int num_vars = 0;
    int num_rows = 0;
    int num_blocks = 0;
    int barrier_degree = 0;
    std::vector<std::string> errors;
};

/// Structural checks: indices in range, cone arities, finite coefficients.
Diagnostics validate(const ConicProgram& program);

/// Largest cone violation of x (0 when x satisfies every block and bound).
double max_violation(const ConicProgram& program, const RVec& x);

/// Sparse text format, one row per line; see docs/formats.md.
void dump(const ConicProgram& program, std::ostream& out);
ConicProgram load(std::istream& in);

/// Human-readable listing of blocks and rows.
void pretty_print(const ConicProgram& program, std::ostream& out);

}  // namespace risres::conic
