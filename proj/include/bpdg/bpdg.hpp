#pragma once

#include "band.hpp"
#include "collision.hpp"
#include "constants.hpp"
#include "driver.hpp"
#include "field.hpp"
#include "kgrid.hpp"
#include "kmatrix_io.hpp"
#include "mc_extract.hpp"
#include "params.hpp"
#include "transport.hpp"
