#include "cfield/encoding.hpp"

#include <cmath>

namespace cfield {

void EncodingConfig::validate() const {
    if (position_frequencies < 0 || direction_frequencies < 0) {
        throw DomainError("encoding: frequency counts must be nonnegative");
    }
}

int encoded_size(int frequencies, bool include_input) {
    if (frequencies < 0) {
        throw DomainError("encoding: frequency count must be nonnegative");
    }
    return (include_input ? 3 : 0) + 6 * frequencies;
}

Eigen::VectorXd encode(const Vec3& x, int frequencies, bool include_input) {
    Eigen::VectorXd out(encoded_size(frequencies, include_input));
    int row = 0;
    if (include_input) {
        out.head<3>() = x;
        row = 3;
    }
    for (int k = 0; k < frequencies; ++k) {
        const double scale = std::ldexp(M_PI, k);
        for (int c = 0; c < 3; ++c) {
            out[row++] = std::sin(scale * x[c]);
            out[row++] = std::cos(scale * x[c]);
        }
    }
    return out;
}

template <typename Scalar>
void encode_batch(const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& x, int frequencies, bool include_input,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& out) {
    const Eigen::Index batch = x.cols();
    const int offset = include_input ? 3 : 0;
    out.resize(encoded_size(frequencies, include_input), batch);
    if (include_input) {
        out.topRows(3) = x;
    }
    if (frequencies == 0) {
        return;
    }
    const int rows = 6 * frequencies;
    for (Eigen::Index j = 0; j < batch; ++j) {
        // Samples along one ray share a direction.
        if (j > 0 && x.col(j) == x.col(j - 1)) {
            out.col(j).segment(offset, rows) = out.col(j - 1).segment(offset, rows);
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            const double angle = M_PI * static_cast<double>(x(c, j));
            double s = std::sin(angle);
            double co = std::cos(angle);
            double octave = 1.0;
            int row = offset + 2 * c;
            for (int k = 0; k < frequencies; ++k) {
                out(row, j) = static_cast<Scalar>(s);
                out(row + 1, j) = static_cast<Scalar>(co);
                row += 6;
                if (k + 1 == frequencies) break;
                octave *= 2.0;
                // Double-angle step; exact trig every 4 octaves bounds drift.
                if ((k + 1) % 4 == 0) {
                    s = std::sin(angle * octave);
                    co = std::cos(angle * octave);
                } else {
                    const double s2 = 2.0 * s * co;
                    co = 1.0 - 2.0 * s * s;
                    s = s2;
                }
            }
        }
    }
}

template void encode_batch<float>(const Eigen::Matrix<float, 3, Eigen::Dynamic>&, int, bool,
                                  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&);
template void encode_batch<double>(const Eigen::Matrix<double, 3, Eigen::Dynamic>&, int, bool,
                                   Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&);

}  // namespace cfield
