#pragma once

#include "flatlab/core.hpp"
#include "flatlab/curve.hpp"
#include "flatlab/experiments.hpp"
#include "flatlab/fft.hpp"
#include "flatlab/grid.hpp"
#include "flatlab/io.hpp"
#include "flatlab/measure.hpp"
#include "flatlab/perfectness.hpp"
#include "flatlab/spectral.hpp"
#include "flatlab/uniformize.hpp"
#include "flatlab/weights.hpp"
