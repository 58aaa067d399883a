#pragma once

#include <string>
#include <utility>
#include <vector>

#include "udainv/nets.hpp"

namespace udainv {

enum class EditMethod { LinearBoundary, Pca };

std::string to_string(EditMethod m);
EditMethod parse_edit_method(std::string_view name);

struct EditDirection {
  std::vector<double> v;  // unit norm
  EditMethod method = EditMethod::LinearBoundary;
  std::string attribute;
  // Separator margin for linear-boundary directions, explained-variance ratio for PCA.
  double meta = 0.0;
};

struct LogisticOptions {
  std::size_t steps = 500;
  double l2 = 1e-3;
  double lr = 0.5;
};

// Logistic regression by full-batch gradient descent; the normalised weight
// vector is the direction.
EditDirection interfacegan_direction(const std::vector<LatentCode>& latents,
                                     const std::vector<int>& labels, std::string attribute,
                                     const LogisticOptions& opt = {});

// Top-k principal components, eigenvalue-descending, largest-magnitude entry positive.
std::vector<EditDirection> ganspace_directions(const std::vector<LatentCode>& latents, std::size_t k);

std::pair<LatentCode, Image> apply_edit(const GeneratorSpec& g, const LatentCode& w,
                                        const EditDirection& dir, double alpha);

// Horizontal intensity centroid scaled to [0,1]; 0.5 for an all-zero image.
double attribute_probe(const Image& x);

// "method,attribute,meta" header line, then the comma-separated vector.
std::string serialize_direction(const EditDirection& d);
EditDirection parse_direction(const std::string& text);

}  // namespace udainv
