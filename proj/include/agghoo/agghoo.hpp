// Umbrella header.
#pragma once

#include "agghoo/bounds.hpp"
#include "agghoo/core.hpp"
#include "agghoo/io.hpp"
#include "agghoo/kernel.hpp"
#include "agghoo/knn.hpp"
#include "agghoo/rng.hpp"
#include "agghoo/select.hpp"
#include "agghoo/simlab.hpp"
