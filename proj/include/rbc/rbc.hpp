#pragma once

#include "rbc/dataset.hpp"
#include "rbc/episode_io.hpp"
#include "rbc/errors.hpp"
#include "rbc/experiments.hpp"
#include "rbc/fft.hpp"
#include "rbc/grid.hpp"
#include "rbc/kdmd.hpp"
#include "rbc/linalg.hpp"
#include "rbc/lran.hpp"
#include "rbc/lran_io.hpp"
#include "rbc/operators.hpp"
#include "rbc/simulation.hpp"
