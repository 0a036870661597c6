#pragma once

#include "rdls/cluster.hpp"
#include "rdls/config.hpp"
#include "rdls/decomp.hpp"
#include "rdls/error.hpp"
#include "rdls/fem.hpp"
#include "rdls/geometry.hpp"
#include "rdls/levelset.hpp"
#include "rdls/linsolve.hpp"
#include "rdls/locate.hpp"
#include "rdls/mesh.hpp"
#include "rdls/perf.hpp"
#include "rdls/physics.hpp"
#include "rdls/simulation.hpp"
#include "rdls/sparse.hpp"
#include "rdls/vtk.hpp"
#include "rdls/workers.hpp"
