#pragma once

#include "poissoncap/bounds.hpp"
#include "poissoncap/channel.hpp"
#include "poissoncap/document.hpp"
#include "poissoncap/info.hpp"
#include "poissoncap/lambert.hpp"
#include "poissoncap/numerics.hpp"
#include "poissoncap/posterior.hpp"
#include "poissoncap/solver.hpp"
#include "poissoncap/sweep.hpp"
#include "poissoncap/types.hpp"
