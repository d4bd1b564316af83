#ifndef OPRISK_OPRISK_HPP
#define OPRISK_OPRISK_HPP

#include "capital.hpp"
#include "conjugate.hpp"
#include "distributions.hpp"
#include "elicitation.hpp"
#include "empirical_bayes.hpp"
#include "error.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "sampling.hpp"

#endif // OPRISK_OPRISK_HPP
