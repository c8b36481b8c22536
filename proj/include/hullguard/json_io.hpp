/*
 Copyright 2026 The hullguard Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

namespace hullguard {

using json = nlohmann::json;

/// Matrices are stored row-major as nested arrays: [[a00, a01], [a10, a11]].
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

json matrices_to_json(const std::vector<Eigen::MatrixXd>& ms);
std::vector<Eigen::MatrixXd> matrices_from_json(const json& j);

json vectors_to_json(const std::vector<Eigen::VectorXd>& vs);
std::vector<Eigen::VectorXd> vectors_from_json(const json& j);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

}  // namespace hullguard
