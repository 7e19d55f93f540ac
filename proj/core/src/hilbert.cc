// Copyright 2026 The qtransfer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qtransfer/hilbert.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace qtransfer {

namespace {

// Flat offsets of every level combination on `positions` (others held at 0).
std::vector<Index> level_offsets(const HilbertSpace &space, std::span<const std::size_t> positions) {
    std::vector<Index> out{0};
    for (std::size_t p : positions) {
        std::vector<Index> next;
        next.reserve(out.size() * space.dims()[p]);
        for (Index base : out) {
            for (int l = 0; l < space.dims()[p]; l++) {
                next.push_back(base + l * space.stride(p));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::vector<std::size_t> positions_of(const HilbertSpace &space, std::span<const std::string> labels) {
    std::vector<std::size_t> out;
    std::set<std::size_t> seen;
    for (const auto &l : labels) {
        std::size_t p = space.position(l);
        if (!seen.insert(p).second) {
            throw UnknownLabel("label listed twice: " + l);
        }
        out.push_back(p);
    }
    return out;
}

std::vector<std::size_t> complement(const HilbertSpace &space, std::span<const std::size_t> positions) {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < space.subsystems(); p++) {
        if (std::find(positions.begin(), positions.end(), p) == positions.end()) {
            out.push_back(p);
        }
    }
    return out;
}

void require_same_space(const HilbertSpace &a, const HilbertSpace &b, const char *what) {
    if (!(a == b)) {
        throw SpaceMismatch(std::string(what) + ": spaces differ (" + a.describe() + " vs " + b.describe() + ")");
    }
}

}  // namespace

HilbertSpace::HilbertSpace(std::vector<int> dims, std::vector<std::string> labels)
    : dims_(std::move(dims)), labels_(std::move(labels)) {
    if (dims_.empty()) {
        throw InvalidDimension("HilbertSpace needs at least one subsystem");
    }
    if (labels_.size() != dims_.size()) {
        throw InvalidDimension("HilbertSpace: labels and dims differ in length");
    }
    std::set<std::string> unique;
    for (std::size_t k = 0; k < dims_.size(); k++) {
        if (dims_[k] < 2) {
            throw InvalidDimension("subsystem '" + labels_[k] + "' has dimension " + std::to_string(dims_[k]) +
                                   " < 2");
        }
        if (labels_[k].empty() || !unique.insert(labels_[k]).second) {
            throw InvalidDimension("subsystem labels must be unique and non-empty");
        }
        if (labels_[k] == "qutrit" && dims_[k] != 3) {
            throw InvalidDimension("qutrit must have dimension 3");
        }
    }
    strides_.assign(dims_.size(), 1);
    total_ = 1;
    for (std::size_t k = dims_.size(); k-- > 0;) {
        strides_[k] = total_;
        if (total_ > std::numeric_limits<Index>::max() / dims_[k]) {
            throw InvalidDimension("HilbertSpace: total dimension overflows");
        }
        total_ *= dims_[k];
    }
}

HilbertSpace HilbertSpace::single(int dim, std::string label) {
    return HilbertSpace({dim}, {std::move(label)});
}

bool HilbertSpace::contains(std::string_view label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t HilbertSpace::position(std::string_view label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) {
        throw UnknownLabel("no subsystem labelled '" + std::string(label) + "' in " + describe());
    }
    return static_cast<std::size_t>(it - labels_.begin());
}

int HilbertSpace::dim(std::string_view label) const {
    return dims_[position(label)];
}

Index HilbertSpace::index_of(std::span<const int> levels) const {
    if (levels.size() != dims_.size()) {
        throw InvalidDimension("index_of: wrong number of levels");
    }
    Index out = 0;
    for (std::size_t k = 0; k < dims_.size(); k++) {
        if (levels[k] < 0 || levels[k] >= dims_[k]) {
            throw InvalidDimension("index_of: level out of range for '" + labels_[k] + "'");
        }
        out += levels[k] * strides_[k];
    }
    return out;
}

std::vector<int> HilbertSpace::levels_of(Index flat) const {
    std::vector<int> out(dims_.size());
    for (std::size_t k = 0; k < dims_.size(); k++) {
        out[k] = static_cast<int>((flat / strides_[k]) % dims_[k]);
    }
    return out;
}

HilbertSpace HilbertSpace::subspace(std::span<const std::string> keep) const {
    std::vector<int> d;
    std::vector<std::string> l;
    for (std::size_t k = 0; k < dims_.size(); k++) {
        if (std::find(keep.begin(), keep.end(), labels_[k]) != keep.end()) {
            d.push_back(dims_[k]);
            l.push_back(labels_[k]);
        }
    }
    for (const auto &k : keep) {
        position(k);
    }
    return HilbertSpace(std::move(d), std::move(l));
}

HilbertSpace HilbertSpace::concat(const HilbertSpace &other) const {
    auto d = dims_;
    auto l = labels_;
    d.insert(d.end(), other.dims_.begin(), other.dims_.end());
    l.insert(l.end(), other.labels_.begin(), other.labels_.end());
    return HilbertSpace(std::move(d), std::move(l));
}

std::string HilbertSpace::describe() const {
    std::string out;
    for (std::size_t k = 0; k < dims_.size(); k++) {
        if (k) {
            out += ' ';
        }
        out += labels_[k] + ":" + std::to_string(dims_[k]);
    }
    return out;
}

Operator::Operator(HilbertSpace space, SpMat matrix) : space_(std::move(space)), matrix_(std::move(matrix)) {
    if (matrix_.rows() != space_.dimension() || matrix_.cols() != space_.dimension()) {
        throw InvalidDimension("Operator: matrix shape does not match space " + space_.describe());
    }
    matrix_.makeCompressed();
}

Operator Operator::adjoint() const {
    return Operator(space_, SpMat(matrix_.adjoint()));
}

bool Operator::is_hermitian(double tol) const {
    SpMat diff = matrix_ - SpMat(matrix_.adjoint());
    double scale = std::max(1.0, matrix_.norm());
    return diff.norm() <= tol * scale;
}

Operator Operator::operator+(const Operator &o) const {
    require_same_space(space_, o.space_, "Operator +");
    return Operator(space_, SpMat(matrix_ + o.matrix_));
}

Operator Operator::operator-(const Operator &o) const {
    require_same_space(space_, o.space_, "Operator -");
    return Operator(space_, SpMat(matrix_ - o.matrix_));
}

Operator Operator::operator*(const Operator &o) const {
    require_same_space(space_, o.space_, "Operator *");
    return Operator(space_, SpMat(matrix_ * o.matrix_));
}

Operator Operator::operator*(cplx s) const {
    return Operator(space_, SpMat(matrix_ * s));
}

Operator identity(const HilbertSpace &space) {
    SpMat m(space.dimension(), space.dimension());
    m.setIdentity();
    return Operator(space, std::move(m));
}

Operator annihilation(int dim) {
    if (dim < 2) {
        throw InvalidDimension("annihilation: dim must be >= 2, got " + std::to_string(dim));
    }
    std::vector<Eigen::Triplet<cplx>> t;
    for (int n = 1; n < dim; n++) {
        t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
    }
    SpMat m(dim, dim);
    m.setFromTriplets(t.begin(), t.end());
    return Operator(HilbertSpace::single(dim), std::move(m));
}

Operator number_operator(int dim) {
    if (dim < 2) {
        throw InvalidDimension("number_operator: dim must be >= 2");
    }
    std::vector<Eigen::Triplet<cplx>> t;
    for (int n = 1; n < dim; n++) {
        t.emplace_back(n, n, static_cast<double>(n));
    }
    SpMat m(dim, dim);
    m.setFromTriplets(t.begin(), t.end());
    return Operator(HilbertSpace::single(dim), std::move(m));
}

Operator fock_projector(int level, int dim) {
    if (dim < 2 || level < 0 || level >= dim) {
        throw InvalidDimension("fock_projector: level out of range");
    }
    SpMat m(dim, dim);
    m.insert(level, level) = 1.0;
    return Operator(HilbertSpace::single(dim), std::move(m));
}

Level parse_level(std::string_view name) {
    if (name == "g") {
        return Level::g;
    }
    if (name == "e") {
        return Level::e;
    }
    if (name == "f") {
        return Level::f;
    }
    throw UnknownLabel("unknown qutrit level '" + std::string(name) + "' (expected g, e or f)");
}

const char *level_name(Level level) {
    switch (level) {
        case Level::g:
            return "g";
        case Level::e:
            return "e";
        case Level::f:
            return "f";
    }
    return "?";
}

Operator qutrit_transition(Level from, Level to) {
    SpMat m(3, 3);
    m.insert(static_cast<int>(to), static_cast<int>(from)) = 1.0;
    return Operator(HilbertSpace::single(3, "qutrit"), std::move(m));
}

Operator qutrit_transition(std::string_view from, std::string_view to) {
    return qutrit_transition(parse_level(from), parse_level(to));
}

Operator sigma_z() {
    return qutrit_transition(Level::e, Level::e) - qutrit_transition(Level::g, Level::g);
}

SpMat embed_matrix(const SpMat &op, const HilbertSpace &space, std::string_view which) {
    std::size_t p = space.position(which);
    int d = space.dims()[p];
    if (op.rows() != d || op.cols() != d) {
        throw InvalidDimension("embed: operator is " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                               " but '" + std::string(which) + "' has dimension " + std::to_string(d));
    }
    Index right = space.stride(p);
    Index left = space.dimension() / (right * d);
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(static_cast<std::size_t>(op.nonZeros() * left * right));
    for (Index r = 0; r < op.outerSize(); r++) {
        for (SpMat::InnerIterator it(op, r); it; ++it) {
            for (Index l = 0; l < left; l++) {
                Index row0 = (l * d + it.row()) * right;
                Index col0 = (l * d + it.col()) * right;
                for (Index k = 0; k < right; k++) {
                    t.emplace_back(row0 + k, col0 + k, it.value());
                }
            }
        }
    }
    SpMat m(space.dimension(), space.dimension());
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

Operator embed(const Operator &op, const HilbertSpace &space, std::string_view which) {
    return Operator(space, embed_matrix(op.matrix(), space, which));
}

Operator kron(const Operator &a, const Operator &b) {
    HilbertSpace space = a.space().concat(b.space());
    Index db = b.matrix().rows();
    std::vector<Eigen::Triplet<cplx>> t;
    for (Index r = 0; r < a.matrix().outerSize(); r++) {
        for (SpMat::InnerIterator ia(a.matrix(), r); ia; ++ia) {
            for (Index s = 0; s < b.matrix().outerSize(); s++) {
                for (SpMat::InnerIterator ib(b.matrix(), s); ib; ++ib) {
                    t.emplace_back(ia.row() * db + ib.row(), ia.col() * db + ib.col(), ia.value() * ib.value());
                }
            }
        }
    }
    SpMat m(space.dimension(), space.dimension());
    m.setFromTriplets(t.begin(), t.end());
    return Operator(space, std::move(m));
}

StateVector::StateVector(HilbertSpace space, CVec amplitudes, double leakage)
    : space_(std::move(space)), amps_(std::move(amplitudes)), leakage_(leakage) {
    if (amps_.size() != space_.dimension()) {
        throw InvalidDimension("StateVector: amplitude count does not match space " + space_.describe());
    }
}

StateVector StateVector::basis(const HilbertSpace &space, std::span<const int> levels) {
    CVec v = CVec::Zero(space.dimension());
    v[space.index_of(levels)] = 1.0;
    return StateVector(space, std::move(v));
}

StateVector StateVector::normalized() const {
    double n = norm();
    if (n == 0.0) {
        throw Error("cannot normalize the zero vector");
    }
    return StateVector(space_, amps_ / n, leakage_);
}

StateVector StateVector::with_amplitudes(CVec amps) const {
    return StateVector(space_, std::move(amps), leakage_);
}

cplx StateVector::inner(const StateVector &other) const {
    require_same_space(space_, other.space_, "inner");
    return amps_.dot(other.amps_);
}

double StateVector::expectation(const Operator &op) const {
    require_same_space(space_, op.space(), "expectation");
    return amps_.dot(op.matrix() * amps_).real();
}

double StateVector::population(std::string_view label, int level) const {
    std::size_t p = space_.position(label);
    Index stride = space_.stride(p);
    int d = space_.dims()[p];
    double out = 0.0;
    for (Index k = 0; k < amps_.size(); k++) {
        if ((k / stride) % d == level) {
            out += std::norm(amps_[k]);
        }
    }
    return out;
}

DensityMatrix StateVector::projector() const {
    return DensityMatrix::pure(*this);
}

StateVector tensor(const StateVector &a, const StateVector &b) {
    HilbertSpace space = a.space().concat(b.space());
    CVec v(space.dimension());
    Index nb = b.amplitudes().size();
    for (Index i = 0; i < a.amplitudes().size(); i++) {
        v.segment(i * nb, nb) = a.amplitudes()[i] * b.amplitudes();
    }
    double leak = 1.0 - (1.0 - a.leakage()) * (1.0 - b.leakage());
    return StateVector(space, std::move(v), leak);
}

StateVector tensor(std::span<const StateVector> parts) {
    if (parts.empty()) {
        throw InvalidDimension("tensor: no factors");
    }
    StateVector out = parts[0];
    for (std::size_t k = 1; k < parts.size(); k++) {
        out = tensor(out, parts[k]);
    }
    return out;
}

StateVector fock_state(int n, int dim, std::string label) {
    if (dim < 2 || n < 0 || n >= dim) {
        throw InvalidDimension("fock_state: level out of range");
    }
    CVec v = CVec::Zero(dim);
    v[n] = 1.0;
    return StateVector(HilbertSpace::single(dim, std::move(label)), std::move(v));
}

StateVector qutrit_state(Level level, std::string label) {
    CVec v = CVec::Zero(3);
    v[static_cast<int>(level)] = 1.0;
    return StateVector(HilbertSpace::single(3, std::move(label)), std::move(v));
}

double coherent_leakage(cplx alpha, int dim) {
    // Sum the tail directly; 1 − Σ_{n<dim} loses all precision below 1e-16.
    double x = std::norm(alpha);
    if (x == 0.0) {
        return 0.0;
    }
    double log_p = -x;
    for (int n = 1; n <= dim; n++) {
        log_p += std::log(x) - std::log(static_cast<double>(n));
    }
    double term = std::exp(log_p);
    double tail = 0.0;
    for (int n = dim; n < dim + 100000; n++) {
        if (n > dim) {
            term *= x / n;
        }
        tail += term;
        if (n > x && term < 1e-18 * tail) {
            break;
        }
    }
    return tail;
}

int default_truncation(double nbar) {
    if (nbar < 0.0) {
        throw InvalidDimension("default_truncation: negative mean photon number");
    }
    return static_cast<int>(std::ceil(nbar + 5.0 * std::sqrt(nbar))) + 4;
}

StateVector coherent_state(cplx alpha, int dim, double leakage_bound, std::string label) {
    if (dim < 2) {
        throw InvalidDimension("coherent_state: dim must be >= 2");
    }
    CVec v(dim);
    v[0] = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n < dim; n++) {
        v[n] = v[n - 1] * alpha / std::sqrt(static_cast<double>(n));
    }
    double leak = coherent_leakage(alpha, dim);
    if (leak > leakage_bound) {
        std::ostringstream msg;
        msg << "coherent_state: truncation at dim " << dim << " leaks " << leak << " > bound " << leakage_bound;
        throw TruncationError(msg.str(), leak);
    }
    v /= v.norm();
    return StateVector(HilbertSpace::single(dim, std::move(label)), std::move(v), leak);
}

CMat displacement_matrix(cplx alpha, int dim) {
    Operator a = annihilation(dim);
    CMat am = a.dense();
    // K = αa† − α*a is anti-Hermitian; iK is Hermitian with eigenpairs (V, w): D = V e^{−iw} V†.
    CMat h = kI * (alpha * am.adjoint() - std::conj(alpha) * am);
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    CVec phases = (-kI * es.eigenvalues().cast<cplx>()).array().exp();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

Operator displacement(cplx alpha, int dim) {
    CMat d = displacement_matrix(alpha, dim);
    SpMat m = d.sparseView(0.0, 0.0);
    return Operator(HilbertSpace::single(dim), std::move(m));
}

DensityMatrix::DensityMatrix(HilbertSpace space, CMat matrix) : space_(std::move(space)), rho_(std::move(matrix)) {
    if (rho_.rows() != space_.dimension() || rho_.cols() != space_.dimension()) {
        throw InvalidDimension("DensityMatrix: matrix shape does not match space " + space_.describe());
    }
}

DensityMatrix DensityMatrix::pure(const StateVector &psi) {
    return DensityMatrix(psi.space(), psi.amplitudes() * psi.amplitudes().adjoint());
}

double DensityMatrix::purity() const {
    // Tr(ρ²) = Σ_ij |ρ_ij|² for Hermitian ρ.
    return rho_.squaredNorm();
}

double DensityMatrix::min_eigenvalue() const {
    CMat h = 0.5 * (rho_ + rho_.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool DensityMatrix::is_hermitian(double tol) const {
    return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool DensityMatrix::is_valid(double tol) const {
    return is_hermitian(tol) && std::abs(trace() - 1.0) <= tol && min_eigenvalue() >= -tol;
}

double DensityMatrix::expectation(const Operator &op) const {
    require_same_space(space_, op.space(), "expectation");
    return (op.matrix() * rho_).trace().real();
}

double fidelity(const StateVector &psi, const DensityMatrix &rho, Warnings *warnings) {
    require_same_space(psi.space(), rho.space(), "fidelity");
    cplx v = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
    if (std::abs(v.imag()) >= 1e-9) {
        std::ostringstream msg;
        msg << "fidelity: <psi|rho|psi> has imaginary part " << v.imag() << "; rho is not Hermitian";
        throw Error(msg.str());
    }
    double x = v.real();
    if (x > 1.0 + 1e-7 && warnings) {
        std::ostringstream msg;
        msg << "fidelity: pre-clamp overlap " << std::setprecision(12) << x << " exceeds 1";
        warnings->push_back(msg.str());
    }
    x = std::clamp(x, 0.0, 1.0);
    return std::sqrt(x);
}

double fidelity(const StateVector &psi, const StateVector &phi) {
    return std::min(1.0, std::abs(psi.inner(phi)));
}

DensityMatrix partial_trace(const DensityMatrix &rho, std::span<const std::string> keep) {
    const HilbertSpace &space = rho.space();
    auto kp = positions_of(space, keep);
    std::sort(kp.begin(), kp.end());
    auto tp = complement(space, kp);
    auto ko = level_offsets(space, kp);
    auto to = level_offsets(space, tp);
    CMat out = CMat::Zero(static_cast<Index>(ko.size()), static_cast<Index>(ko.size()));
    for (std::size_t i = 0; i < ko.size(); i++) {
        for (std::size_t j = 0; j < ko.size(); j++) {
            cplx s = 0.0;
            for (Index t : to) {
                s += rho.matrix()(ko[i] + t, ko[j] + t);
            }
            out(static_cast<Index>(i), static_cast<Index>(j)) = s;
        }
    }
    return DensityMatrix(space.subspace(keep), std::move(out));
}

DensityMatrix reduced_density(const StateVector &psi, std::span<const std::string> keep) {
    const HilbertSpace &space = psi.space();
    auto kp = positions_of(space, keep);
    std::sort(kp.begin(), kp.end());
    auto tp = complement(space, kp);
    auto ko = level_offsets(space, kp);
    auto to = level_offsets(space, tp);
    CMat m(static_cast<Index>(ko.size()), static_cast<Index>(to.size()));
    for (std::size_t i = 0; i < ko.size(); i++) {
        for (std::size_t t = 0; t < to.size(); t++) {
            m(static_cast<Index>(i), static_cast<Index>(t)) = psi.amplitudes()[ko[i] + to[t]];
        }
    }
    return DensityMatrix(space.subspace(keep), m * m.adjoint());
}

CVec apply_local(const HilbertSpace &space, const CVec &psi, const CMat &u, std::span<const std::string> labels) {
    auto pos = positions_of(space, labels);
    auto local = level_offsets(space, pos);
    if (u.rows() != static_cast<Index>(local.size()) || u.cols() != u.rows()) {
        throw InvalidDimension("apply_local: operator size does not match the product of subsystem dims");
    }
    auto rest = level_offsets(space, complement(space, pos));
    CVec out(psi.size());
    CVec buf(static_cast<Index>(local.size()));
    for (Index base : rest) {
        for (std::size_t k = 0; k < local.size(); k++) {
            buf[static_cast<Index>(k)] = psi[base + local[k]];
        }
        CVec r = u * buf;
        for (std::size_t k = 0; k < local.size(); k++) {
            out[base + local[k]] = r[static_cast<Index>(k)];
        }
    }
    return out;
}

StateVector apply_local(const StateVector &psi, const CMat &u, std::span<const std::string> labels) {
    return psi.with_amplitudes(apply_local(psi.space(), psi.amplitudes(), u, labels));
}

namespace {

void write_header(std::ostream &out, const char *kind, const HilbertSpace &space) {
    out << "qtransfer " << kind << "\n";
    out << "space " << space.describe() << "\n";
}

HilbertSpace read_header(std::istream &in, const std::string &kind) {
    std::string line;
    std::getline(in, line);
    if (line != "qtransfer " + kind) {
        throw ConfigError("text form: expected header 'qtransfer " + kind + "', got '" + line + "'");
    }
    std::getline(in, line);
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "space") {
        throw ConfigError("text form: expected 'space' line");
    }
    std::vector<int> dims;
    std::vector<std::string> labels;
    std::string tok;
    while (ss >> tok) {
        auto c = tok.rfind(':');
        if (c == std::string::npos) {
            throw ConfigError("text form: malformed subsystem '" + tok + "'");
        }
        labels.push_back(tok.substr(0, c));
        dims.push_back(std::stoi(tok.substr(c + 1)));
    }
    return HilbertSpace(dims, labels);
}

void write_number(std::ostream &out, cplx v) {
    out << ' ' << v.real() << ' ' << v.imag();
}

}  // namespace

void write_text(std::ostream &out, const Operator &op) {
    auto flags = out.flags();
    out << std::setprecision(17);
    write_header(out, "operator", op.space());
    out << "entries " << op.matrix().nonZeros() << "\n";
    for (Index r = 0; r < op.matrix().outerSize(); r++) {
        for (SpMat::InnerIterator it(op.matrix(), r); it; ++it) {
            out << it.row() << ' ' << it.col();
            write_number(out, it.value());
            out << "\n";
        }
    }
    out.flags(flags);
}

void write_text(std::ostream &out, const StateVector &psi) {
    auto flags = out.flags();
    out << std::setprecision(17);
    write_header(out, "state", psi.space());
    out << "leakage " << psi.leakage() << "\n";
    Index nnz = (psi.amplitudes().array() != cplx(0.0)).count();
    out << "entries " << nnz << "\n";
    for (Index k = 0; k < psi.amplitudes().size(); k++) {
        if (psi.amplitudes()[k] != cplx(0.0)) {
            out << k;
            write_number(out, psi.amplitudes()[k]);
            out << "\n";
        }
    }
    out.flags(flags);
}

void write_text(std::ostream &out, const DensityMatrix &rho) {
    auto flags = out.flags();
    out << std::setprecision(17);
    write_header(out, "density", rho.space());
    Index nnz = (rho.matrix().array() != cplx(0.0)).count();
    out << "entries " << nnz << "\n";
    for (Index r = 0; r < rho.matrix().rows(); r++) {
        for (Index c = 0; c < rho.matrix().cols(); c++) {
            if (rho.matrix()(r, c) != cplx(0.0)) {
                out << r << ' ' << c;
                write_number(out, rho.matrix()(r, c));
                out << "\n";
            }
        }
    }
    out.flags(flags);
}

namespace {

Index read_count(std::istream &in, const char *tag) {
    std::string t;
    Index n = 0;
    in >> t >> n;
    if (t != tag || !in) {
        throw ConfigError(std::string("text form: expected '") + tag + "' line");
    }
    return n;
}

}  // namespace

Operator read_operator_text(std::istream &in) {
    HilbertSpace space = read_header(in, "operator");
    Index n = read_count(in, "entries");
    std::vector<Eigen::Triplet<cplx>> t;
    for (Index k = 0; k < n; k++) {
        Index r, c;
        double re, im;
        if (!(in >> r >> c >> re >> im)) {
            throw ConfigError("text form: truncated operator entries");
        }
        t.emplace_back(r, c, cplx(re, im));
    }
    SpMat m(space.dimension(), space.dimension());
    m.setFromTriplets(t.begin(), t.end());
    return Operator(space, std::move(m));
}

StateVector read_state_text(std::istream &in) {
    HilbertSpace space = read_header(in, "state");
    std::string tag;
    double leak = 0.0;
    in >> tag >> leak;
    if (tag != "leakage") {
        throw ConfigError("text form: expected 'leakage' line");
    }
    Index n = read_count(in, "entries");
    CVec v = CVec::Zero(space.dimension());
    for (Index k = 0; k < n; k++) {
        Index i;
        double re, im;
        if (!(in >> i >> re >> im)) {
            throw ConfigError("text form: truncated state entries");
        }
        v[i] = cplx(re, im);
    }
    return StateVector(space, std::move(v), leak);
}

DensityMatrix read_density_text(std::istream &in) {
    HilbertSpace space = read_header(in, "density");
    Index n = read_count(in, "entries");
    CMat m = CMat::Zero(space.dimension(), space.dimension());
    for (Index k = 0; k < n; k++) {
        Index r, c;
        double re, im;
        if (!(in >> r >> c >> re >> im)) {
            throw ConfigError("text form: truncated density entries");
        }
        m(r, c) = cplx(re, im);
    }
    return DensityMatrix(space, std::move(m));
}

}  // namespace qtransfer
