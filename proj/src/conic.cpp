#include "risres/conic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace risres::conic {

AffineExpr& AffineExpr::add(int index, double coeff) {
    if (coeff != 0.0) terms.emplace_back(index, coeff);
    return *this;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
    terms.insert(terms.end(), other.terms.begin(), other.terms.end());
    constant += other.constant;
    return *this;
}

AffineExpr& AffineExpr::operator*=(double s) {
    for (auto& t : terms) t.second *= s;
    constant *= s;
    return *this;
}

void AffineExpr::compress() {
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, double>> merged;
    for (const auto& t : terms) {
        if (!merged.empty() && merged.back().first == t.first)
            merged.back().second += t.second;
        else
            merged.push_back(t);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(), [](const auto& t) { return t.second == 0.0; }),
                 merged.end());
    terms = std::move(merged);
}

double AffineExpr::evaluate(const RVec& x) const {
    double v = constant;
    for (const auto& [i, c] : terms) v += c * x(i);
    return v;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) {
    AffineExpr nb = b;
    nb *= -1.0;
    return a += nb;
}
AffineExpr operator*(double s, AffineExpr a) { return a *= s; }

const char* cone_tag(ConeKind kind) {
    switch (kind) {
        case ConeKind::Zero: return "zero";
        case ConeKind::Nonnegative: return "nonneg";
        case ConeKind::SecondOrder: return "soc";
        case ConeKind::Exponential: return "exp";
    }
    return "?";
}

namespace {

ConeKind parse_tag(const std::string& tag) {
    if (tag == "zero") return ConeKind::Zero;
    if (tag == "nonneg") return ConeKind::Nonnegative;
    if (tag == "soc") return ConeKind::SecondOrder;
    if (tag == "exp") return ConeKind::Exponential;
    throw std::runtime_error("unknown cone tag '" + tag + "'");
}

int degree(const ConeBlock& b) {
    switch (b.kind) {
        case ConeKind::Zero: return 0;
        case ConeKind::Nonnegative: return static_cast<int>(b.rows.size());
        case ConeKind::SecondOrder: return 2;
        case ConeKind::Exponential: return 3;
    }
    return 0;
}

double block_violation(const ConeBlock& b, const RVec& x) {
    std::vector<double> s;
    s.reserve(b.rows.size());
    for (const auto& r : b.rows) s.push_back(r.evaluate(x));
    double viol = 0.0;
    switch (b.kind) {
        case ConeKind::Zero:
            for (double v : s) viol = std::max(viol, std::abs(v));
            break;
        case ConeKind::Nonnegative:
            for (double v : s) viol = std::max(viol, -v);
            break;
        case ConeKind::SecondOrder: {
            double tail = 0.0;
            for (std::size_t i = 1; i < s.size(); ++i) tail += s[i] * s[i];
            viol = std::max(0.0, std::sqrt(tail) - s[0]);
            break;
        }
        case ConeKind::Exponential: {
            const double ex = s[0], ey = s[1], ez = s[2];
            if (ey > 0.0)
                viol = std::max({0.0, ey * std::exp(ex / ey) - ez, -ez});
            else
                viol = std::max({0.0, -ey, ex, -ez});  // closure: y = 0, x <= 0, z >= 0
            break;
        }
    }
    return viol;
}

}  // namespace

int ConicProgram::add_variable(std::string name, double lb, double ub) {
    const int idx = num_vars++;
    var_names.push_back(std::move(name));
    objective.conservativeResize(num_vars);
    objective(idx) = 0.0;
    lower.conservativeResize(num_vars);
    upper.conservativeResize(num_vars);
    lower(idx) = lb;
    upper(idx) = ub;
    return idx;
}

ConeBlock& ConicProgram::add_block(ConeKind kind, std::string name) {
    blocks.push_back(ConeBlock{kind, {}, std::move(name)});
    return blocks.back();
}

void ConicProgram::add_objective(const AffineExpr& e) {
    for (const auto& [i, c] : e.terms) objective(i) += c;
    objective_constant += e.constant;
}

double ConicProgram::objective_value(const RVec& x) const { return objective.dot(x) + objective_constant; }

int ConicProgram::count_rows() const {
    int n = 0;
    for (const auto& b : blocks) n += static_cast<int>(b.rows.size());
    return n;
}

Diagnostics validate(const ConicProgram& p) {
    Diagnostics d;
    d.num_vars = p.num_vars;
    d.num_blocks = static_cast<int>(p.blocks.size());
    auto fail = [&](std::string msg) {
        d.valid = false;
        d.errors.push_back(std::move(msg));
    };
    if (p.objective.size() != p.num_vars) fail("objective has wrong length");
    if (p.lower.size() != p.num_vars || p.upper.size() != p.num_vars) fail("bounds have wrong length");
    if (static_cast<int>(p.var_names.size()) != p.num_vars) fail("variable name map has wrong length");
    if (p.initial_point.size() != 0 && p.initial_point.size() != p.num_vars) fail("initial point has wrong length");
    if (!p.objective.allFinite() || !std::isfinite(p.objective_constant)) fail("objective is not finite");
    for (int i = 0; i < std::min<int>(p.num_vars, static_cast<int>(p.lower.size())); ++i) {
        if (std::isnan(p.lower(i)) || std::isnan(p.upper(i)) || p.lower(i) > p.upper(i))
            fail("variable " + std::to_string(i) + " has invalid bounds");
        if (std::isfinite(p.lower(i))) ++d.barrier_degree;
        if (std::isfinite(p.upper(i))) ++d.barrier_degree;
    }
    for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
        const auto& b = p.blocks[bi];
        const std::string where = "block " + std::to_string(bi) + " (" + b.name + ")";
        if (b.rows.empty()) fail(where + " has no rows");
        if (b.kind == ConeKind::SecondOrder && b.rows.size() < 2) fail(where + ": second-order cone needs dim >= 2");
        if (b.kind == ConeKind::Exponential && b.rows.size() != 3) fail(where + ": exponential cone needs 3 rows");
        for (const auto& r : b.rows) {
            if (!std::isfinite(r.constant)) fail(where + " has a non-finite constant");
            for (const auto& [i, c] : r.terms) {
                if (i < 0 || i >= p.num_vars) fail(where + " references undeclared variable " + std::to_string(i));
                if (!std::isfinite(c)) fail(where + " has a non-finite coefficient");
            }
        }
        d.num_rows += static_cast<int>(b.rows.size());
        d.barrier_degree += degree(b);
    }
    return d;
}

double max_violation(const ConicProgram& p, const RVec& x) {
    double viol = 0.0;
    for (const auto& b : p.blocks) viol = std::max(viol, block_violation(b, x));
    for (int i = 0; i < p.num_vars; ++i) {
        viol = std::max(viol, p.lower(i) - x(i));
        viol = std::max(viol, x(i) - p.upper(i));
    }
    return viol;
}

namespace {

void write_number(std::ostream& out, double v) {
    if (std::isinf(v))
        out << (v > 0 ? "inf" : "-inf");
    else
        out << std::setprecision(17) << v;
}

double read_number(std::istream& in) {
    std::string tok;
    in >> tok;
    if (tok == "inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(tok);
}

void write_expr(std::ostream& out, const AffineExpr& e) {
    write_number(out, e.constant);
    out << ' ' << e.terms.size();
    for (const auto& [i, c] : e.terms) {
        out << ' ' << i << ' ';
        write_number(out, c);
    }
}

AffineExpr read_expr(std::istream& in) {
    AffineExpr e;
    e.constant = read_number(in);
    std::size_t nnz = 0;
    in >> nnz;
    for (std::size_t t = 0; t < nnz; ++t) {
        int i = 0;
        in >> i;
        e.terms.emplace_back(i, read_number(in));
    }
    return e;
}

}  // namespace

void dump(const ConicProgram& p, std::ostream& out) {
    out << "risres-conic 1\n";
    out << "variables " << p.num_vars << '\n';
    for (int i = 0; i < p.num_vars; ++i) {
        out << "var " << i << ' ' << (p.var_names[static_cast<std::size_t>(i)].empty() ? "_" : p.var_names[static_cast<std::size_t>(i)]) << ' ';
        write_number(out, p.lower(i));
        out << ' ';
        write_number(out, p.upper(i));
        out << '\n';
    }
    AffineExpr obj(p.objective_constant);
    for (int i = 0; i < p.num_vars; ++i) obj.add(i, p.objective(i));
    out << "objective ";
    write_expr(out, obj);
    out << '\n';
    for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
        const auto& b = p.blocks[bi];
        out << "block " << bi << ' ' << cone_tag(b.kind) << ' ' << b.rows.size() << ' '
            << (b.name.empty() ? "_" : b.name) << '\n';
        for (const auto& r : b.rows) {
            out << cone_tag(b.kind) << ' ' << bi << ' ';
            write_expr(out, r);
            out << '\n';
        }
    }
    if (p.initial_point.size() == p.num_vars && p.num_vars > 0) {
        out << "start";
        for (int i = 0; i < p.num_vars; ++i) {
            out << ' ';
            write_number(out, p.initial_point(i));
        }
        out << '\n';
    }
    out << "end\n";
}

ConicProgram load(std::istream& in) {
    std::string word;
    int version = 0;
    in >> word >> version;
    if (word != "risres-conic" || version != 1) throw std::runtime_error("not a risres-conic v1 stream");
    ConicProgram p;
    int n = 0;
    in >> word >> n;
    if (word != "variables" || n < 0) throw std::runtime_error("malformed variables line");
    for (int i = 0; i < n; ++i) {
        int idx = 0;
        std::string name;
        in >> word >> idx >> name;
        if (word != "var" || idx != i) throw std::runtime_error("malformed var line " + std::to_string(i));
        const double lb = read_number(in);
        const double ub = read_number(in);
        p.add_variable(name == "_" ? "" : name, lb, ub);
    }
    in >> word;
    if (word != "objective") throw std::runtime_error("missing objective line");
    p.add_objective(read_expr(in));
    while (in >> word) {
        if (word == "end") return p;
        if (word == "block") {
            std::size_t idx = 0, rows = 0;
            std::string tag, name;
            in >> idx >> tag >> rows >> name;
            if (idx != p.blocks.size()) throw std::runtime_error("blocks out of order");
            auto& b = p.add_block(parse_tag(tag), name == "_" ? "" : name);
            for (std::size_t r = 0; r < rows; ++r) {
                std::string row_tag;
                std::size_t row_block = 0;
                in >> row_tag >> row_block;
                if (row_tag != tag || row_block != idx) throw std::runtime_error("row does not match its block");
                b.rows.push_back(read_expr(in));
            }
        } else if (word == "start") {
            p.initial_point.resize(p.num_vars);
            for (int i = 0; i < p.num_vars; ++i) p.initial_point(i) = read_number(in);
        } else {
            throw std::runtime_error("unexpected token '" + word + "'");
        }
        if (!in) throw std::runtime_error("truncated conic stream");
    }
    throw std::runtime_error("missing end marker");
}

namespace {

std::string expr_string(const ConicProgram& p, const AffineExpr& e) {
    std::ostringstream os;
    os << std::setprecision(6);
    bool first = true;
    for (const auto& [i, c] : e.terms) {
        os << (first ? (c < 0 ? "-" : "") : (c < 0 ? " - " : " + ")) << std::abs(c) << '*'
           << (p.var_names[static_cast<std::size_t>(i)].empty() ? "x" + std::to_string(i) : p.var_names[static_cast<std::size_t>(i)]);
        first = false;
    }
    if (first)
        os << e.constant;
    else if (e.constant != 0.0)
        os << (e.constant < 0 ? " - " : " + ") << std::abs(e.constant);
    return os.str();
}

}  // namespace

void pretty_print(const ConicProgram& p, std::ostream& out) {
    const auto d = validate(p);
    out << "conic program: " << p.num_vars << " variables, " << d.num_rows << " rows in " << d.num_blocks
        << " blocks, barrier degree " << d.barrier_degree << '\n';
    AffineExpr obj(p.objective_constant);
    for (int i = 0; i < p.num_vars; ++i) obj.add(i, p.objective(i));
    out << "minimize " << expr_string(p, obj) << '\n';
    for (const auto& b : p.blocks) {
        out << "  [" << cone_tag(b.kind) << ' ' << b.rows.size() << "] " << b.name << '\n';
        for (const auto& r : b.rows) out << "      " << expr_string(p, r) << '\n';
    }
    for (int i = 0; i < p.num_vars; ++i)
        if (std::isfinite(p.lower(i)) || std::isfinite(p.upper(i)))
            out << "  bound " << p.lower(i) << " <= " << p.var_names[static_cast<std::size_t>(i)] << " <= " << p.upper(i) << '\n';
}

}  // namespace risres::conic
