#ifndef KINETIC_KINETIC_HPP
#define KINETIC_KINETIC_HPP

#include "kinetic/baseflow.hpp"
#include "kinetic/cocycle.hpp"
#include "kinetic/error.hpp"
#include "kinetic/generator.hpp"
#include "kinetic/lpmetric.hpp"
#include "kinetic/mat2.hpp"
#include "kinetic/perturb.hpp"
#include "kinetic/quadrature.hpp"
#include "kinetic/random.hpp"

#endif // KINETIC_KINETIC_HPP
