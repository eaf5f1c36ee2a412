#pragma once

#include <Eigen/Core>

#include "cfield/grid.hpp"

namespace cfield {

struct EncodingConfig {
    int position_frequencies = 10;
    int direction_frequencies = 4;
    bool include_input = true;

    void validate() const;
    bool operator==(const EncodingConfig&) const = default;
};

// 3 * include_input + 6 * frequencies.
int encoded_size(int frequencies, bool include_input);

// [x (optional), then for k = 0..L-1 and each coordinate c:
//  sin(2^k pi x_c), cos(2^k pi x_c)].
Eigen::VectorXd encode(const Vec3& x, int frequencies, bool include_input);

// Column-wise encoding of a 3 x B batch into `out` (encoded_size x B).
// Angles are doubled in double precision, then cast to Scalar.
template <typename Scalar>
void encode_batch(const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& x, int frequencies, bool include_input,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& out);

extern template void encode_batch<float>(const Eigen::Matrix<float, 3, Eigen::Dynamic>&, int, bool,
                                         Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&);
extern template void encode_batch<double>(const Eigen::Matrix<double, 3, Eigen::Dynamic>&, int, bool,
                                          Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&);

}  // namespace cfield
