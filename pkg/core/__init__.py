# This file makes Python treat the `core` directory as a package.
