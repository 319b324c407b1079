#pragma once

#include "boundary.hpp"
#include "common.hpp"
#include "elastic.hpp"
#include "kernels.hpp"
#include "linsolve.hpp"
#include "multiphase.hpp"
#include "neighborhood.hpp"
#include "nonpressure.hpp"
#include "nsearch.hpp"
#include "particles.hpp"
#include "pressure.hpp"
#include "rigid.hpp"
#include "scene.hpp"
#include "sim.hpp"
#include "sph_ops.hpp"
