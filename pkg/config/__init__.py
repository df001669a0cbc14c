# This file makes Python treat the `config` directory as a package.
