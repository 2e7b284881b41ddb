#pragma once

#include "uxmc/uniform_sparse.hpp"

namespace fixture {

/// 4 x 5 matrix with two connections per label:
///   label 0: rows {0,2} = {0.7, 1.2}    label 1: rows {1,3} = {-1.0, 0.6}
///   label 2: rows {0,1} = {2.4, 3.1}    label 3: rows {0,3} = {2.2, 0.0}
///   label 4: rows {2,3} = {0.2, 0.3}
template <typename T>
uxmc::UniformSparseMatrix<T> small_uniform() {
    return uxmc::UniformSparseMatrix<T>(4, 5, 2, {0, 2, 1, 3, 0, 1, 0, 3, 2, 3},
                                        {T(0.7), T(1.2), T(-1.0), T(0.6), T(2.4), T(3.1), T(2.2), T(0.0), T(0.2),
                                         T(0.3)});
}

}  // namespace fixture
