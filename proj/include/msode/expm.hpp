#pragma once

#include <cmath>

#include "msode/common.hpp"

namespace msode {

// Matrix exponential, order-13 Pade approximant with scaling and squaring.
// The scaling power comes from the 1-norm: ||A/2^s|| <= theta13, the largest
// norm at which the order-13 approximant stays at double precision.
inline Matrix expm(const Matrix& a) {
    static const double b[14] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
    static const double theta13 = 5.371920351148152;

    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw ConfigError("expm needs a square matrix");
    if (!a.allFinite()) throw NumericalError("expm: non-finite entries");

    double norm = a.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
    int s = 0;
    if (norm > theta13) s = static_cast<int>(std::ceil(std::log2(norm / theta13)));

    Matrix as = a / std::ldexp(1.0, s);
    Matrix a2 = as * as;
    Matrix a4 = a2 * a2;
    Matrix a6 = a2 * a4;
    Matrix id = Matrix::Identity(n, n);

    Matrix u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
                     b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
               b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    Matrix f = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < s; ++k) f = f * f;
    return f;
}

}  // namespace msode
