#pragma once

#include "touchgen/core/autograd.hpp"
#include "touchgen/core/image.hpp"

namespace touchgen::dit {

// Token (py, px) is row py * (W/p) + px; column (dy * p + dx) * C + c.
ag::Matrix<float> patchify(const Image& image, int patch);
Image unpatchify(const ag::Matrix<float>& tokens, int patch, int height, int width, int channels);

// Fixed 2-D sin/cos table for a grid_h x grid_w token grid; width % 4 == 0.
template <class T>
ag::Matrix<T> position_embedding_2d(int grid_h, int grid_w, int width);

// [cos(t f_i), sin(t f_i)] with f_i = 10000^(-i/half); dim must be even.
template <class T>
ag::Matrix<T> timestep_sinusoid(int t, int dim);

}  // namespace touchgen::dit
