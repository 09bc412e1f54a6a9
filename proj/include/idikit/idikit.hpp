#ifndef IDIKIT_IDIKIT_HPP
#define IDIKIT_IDIKIT_HPP

#include "idikit/core.hpp"
#include "idikit/mesh.hpp"
#include "idikit/polyhedral.hpp"
#include "idikit/setvalued.hpp"
#include "idikit/kernel.hpp"
#include "idikit/gronwall.hpp"
#include "idikit/problem.hpp"
#include "idikit/dynamics.hpp"
#include "idikit/bolza.hpp"
#include "idikit/conditions.hpp"
#include "idikit/catalog.hpp"

#endif
