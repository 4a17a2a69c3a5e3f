#pragma once

#include "calculus.hpp"
#include "catalog.hpp"
#include "expr.hpp"
#include "identities.hpp"
#include "jet.hpp"
#include "linalg.hpp"
#include "manifest.hpp"
#include "report.hpp"
#include "riemann.hpp"
#include "rng.hpp"
#include "soliton.hpp"
#include "submersion.hpp"
