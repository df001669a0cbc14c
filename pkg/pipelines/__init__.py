# This file makes Python treat the `pipelines` directory as a package.
