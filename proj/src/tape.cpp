#include "bpu/tape.hpp"

#include <cmath>
#include <limits>

namespace bpu {

ElemMap ElemMap::activation(Activation act) {
    switch (act) {
        case Activation::Tanh: return {ElemKind::Tanh};
        case Activation::Relu: return {ElemKind::Relu};
        case Activation::Sigmoid: return {ElemKind::Sigmoid};
    }
    return {ElemKind::Identity};
}

double ElemMap::apply(double x) const {
    switch (kind) {
        case ElemKind::Identity: return x;
        case ElemKind::Tanh: return activate(x, Activation::Tanh);
        case ElemKind::Relu: return activate(x, Activation::Relu);
        case ElemKind::Sigmoid: return activate(x, Activation::Sigmoid);
        case ElemKind::SineOmega: return std::sin(p0 * x);
        case ElemKind::Clip: return x < p0 ? p0 : (x > p1 ? p1 : x);
    }
    return x;
}

double ElemMap::deriv(double x) const {
    switch (kind) {
        case ElemKind::Identity: return 1.0;
        case ElemKind::Tanh: return activate_deriv(x, Activation::Tanh);
        case ElemKind::Relu: return activate_deriv(x, Activation::Relu);
        case ElemKind::Sigmoid: return activate_deriv(x, Activation::Sigmoid);
        case ElemKind::SineOmega: return p0 * std::cos(p0 * x);
        case ElemKind::Clip: return (x > p0 && x < p1) ? 1.0 : 0.0;
    }
    return 1.0;
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(int id) const {
    require(id >= 0 && id < size(), "tape: node id out of range");
    return nodes_[static_cast<size_t>(id)];
}

int Tape::constant(Matrix v) {
    Node n;
    n.op = Op::Const;
    n.val = std::move(v);
    return push(std::move(n));
}

int Tape::param(Matrix v) {
    Node n;
    n.op = Op::Param;
    n.val = std::move(v);
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    Node n;
    n.op = Op::Matmul;
    n.a = a;
    n.b = b;
    n.val = bpu::matmul(node(a).val, node(b).val);
    return push(std::move(n));
}

int Tape::matmul_nt(int a, int b) {
    Node n;
    n.op = Op::MatmulNT;
    n.a = a;
    n.b = b;
    n.val = bpu::matmul_nt(node(a).val, node(b).val);
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.val = bpu::add(node(a).val, node(b).val);
    return push(std::move(n));
}

int Tape::add_bias(int a, int bias) {
    const Matrix& av = node(a).val;
    const Matrix& bv = node(bias).val;
    require(bv.rows == 1 && bv.cols == av.cols,
            "add_bias: bias must be 1 x " + std::to_string(av.cols) + ", got " + bv.shape_str());
    Node n;
    n.op = Op::AddBias;
    n.a = a;
    n.b = bias;
    n.val = av;
    for (int i = 0; i < av.rows; ++i)
        for (int j = 0; j < av.cols; ++j) n.val.at(i, j) += bv.at(0, j);
    return push(std::move(n));
}

int Tape::elemwise(int a, ElemMap map) {
    Node n;
    n.op = Op::Elemwise;
    n.a = a;
    n.map = map;
    n.val = node(a).val;
    for (double& v : n.val.values) v = map.apply(v);
    return push(std::move(n));
}

int Tape::row_softmax(int a) {
    const Matrix& av = node(a).val;
    Node n;
    n.op = Op::RowSoftmax;
    n.a = a;
    n.val = Matrix(av.rows, av.cols);
    for (int i = 0; i < av.rows; ++i) {
        auto p = softmax_row(av.row(i));
        for (int j = 0; j < av.cols; ++j) n.val.at(i, j) = p[static_cast<size_t>(j)];
    }
    return push(std::move(n));
}

int Tape::scale_by(int a, double s) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.s = s;
    n.val = bpu::scale(node(a).val, s);
    return push(std::move(n));
}

int Tape::mean_pool_rows(int a) {
    const Matrix& av = node(a).val;
    Node n;
    n.op = Op::MeanPool;
    n.a = a;
    n.val = Matrix(1, av.cols);
    for (int j = 0; j < av.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < av.rows; ++i) s += av.at(i, j);
        n.val.at(0, j) = s / av.rows;
    }
    return push(std::move(n));
}

int Tape::cross_entropy_on_logits(int logits, int y) {
    const Matrix& zv = node(logits).val;
    require(zv.rows == 1 && zv.cols >= 2, "cross_entropy_on_logits: logits must be a 1 x C row, C >= 2");
    require(y >= 0 && y < zv.cols, "cross_entropy_on_logits: label out of range");
    // logsumexp(z) - z_y, max-subtracted.
    double zmax = -std::numeric_limits<double>::infinity();
    for (double v : zv.values) zmax = std::max(zmax, v);
    double sum = 0.0;
    for (double v : zv.values) sum += std::exp(v - zmax);
    Node n;
    n.op = Op::CrossEntropy;
    n.a = logits;
    n.label = y;
    n.val = Matrix(1, 1);
    n.val.at(0, 0) = std::log(sum) + zmax - zv.at(0, y);
    return push(std::move(n));
}

const Matrix& Tape::value(int id) const { return node(id).val; }

bool Tape::is_param(int id) const { return node(id).op == Op::Param; }

void Tape::backward(int loss_id) {
    require(size() > 0, "tape: backward on an empty tape");
    const Node& loss = node(loss_id);
    require(loss.val.rows == 1 && loss.val.cols == 1, "tape: backward requires a scalar node");

    for (Node& n : nodes_) n.grad = Matrix(n.val.rows, n.val.cols);
    nodes_[static_cast<size_t>(loss_id)].grad.at(0, 0) = 1.0;

    for (int id = loss_id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        const Matrix& g = n.grad;
        switch (n.op) {
            case Op::Const:
            case Op::Param:
                break;
            case Op::Matmul: {
                Node& na = nodes_[static_cast<size_t>(n.a)];
                Node& nb = nodes_[static_cast<size_t>(n.b)];
                na.grad = bpu::add(na.grad, bpu::matmul_nt(g, nb.val));
                nb.grad = bpu::add(nb.grad, bpu::matmul_tn(na.val, g));
                break;
            }
            case Op::MatmulNT: {
                Node& na = nodes_[static_cast<size_t>(n.a)];
                Node& nb = nodes_[static_cast<size_t>(n.b)];
                na.grad = bpu::add(na.grad, bpu::matmul(g, nb.val));
                nb.grad = bpu::add(nb.grad, bpu::matmul_tn(g, na.val));
                break;
            }
            case Op::Add: {
                Node& na = nodes_[static_cast<size_t>(n.a)];
                Node& nb = nodes_[static_cast<size_t>(n.b)];
                na.grad = bpu::add(na.grad, g);
                nb.grad = bpu::add(nb.grad, g);
                break;
            }
            case Op::AddBias: {
                Node& na = nodes_[static_cast<size_t>(n.a)];
                Node& nb = nodes_[static_cast<size_t>(n.b)];
                na.grad = bpu::add(na.grad, g);
                for (int j = 0; j < g.cols; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < g.rows; ++i) s += g.at(i, j);
                    nb.grad.at(0, j) += s;
                }
                break;
            }
            case Op::Elemwise: {
                Node& na = nodes_[static_cast<size_t>(n.a)];
                for (size_t i = 0; i < g.values.size(); ++i)
                    na.grad.values[i] += g.values[i] * n.map.deriv(na.val.values[i]);
                break;
            }
            case Op::RowSoftmax: {
                // dz_i = p_i * (dp_i - sum_j dp_j p_j), rowwise.
                Node& na = nodes_[static_cast<size_t>(n.a)];
                for (int i = 0; i < g.rows; ++i) {
                    double dotgp = 0.0;
                    for (int j = 0; j < g.cols; ++j) dotgp += g.at(i, j) * n.val.at(i, j);
                    for (int j = 0; j < g.cols; ++j)
                        na.grad.at(i, j) += n.val.at(i, j) * (g.at(i, j) - dotgp);
                }
                break;
            }
            case Op::Scale: {
                Node& na = nodes_[static_cast<size_t>(n.a)];
                na.grad = bpu::add(na.grad, bpu::scale(g, n.s));
                break;
            }
            case Op::MeanPool: {
                Node& na = nodes_[static_cast<size_t>(n.a)];
                const double inv = 1.0 / na.val.rows;
                for (int i = 0; i < na.val.rows; ++i)
                    for (int j = 0; j < na.val.cols; ++j) na.grad.at(i, j) += inv * g.at(0, j);
                break;
            }
            case Op::CrossEntropy: {
                // d/dz (logsumexp(z) - z_y) = softmax(z) - e_y.
                Node& na = nodes_[static_cast<size_t>(n.a)];
                auto p = softmax(na.val.row(0));
                const double gs = g.at(0, 0);
                for (int j = 0; j < na.val.cols; ++j) {
                    double d = p[static_cast<size_t>(j)];
                    if (j == n.label) d -= 1.0;
                    na.grad.at(0, j) += gs * d;
                }
                break;
            }
        }
    }
    backward_done_ = true;
}

const Matrix& Tape::grad(int id) const {
    require(backward_done_, "tape: grad() requires backward() first");
    return node(id).grad;
}

}  // namespace bpu
