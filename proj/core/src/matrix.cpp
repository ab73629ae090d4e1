#include "fluxfed/matrix.hpp"
