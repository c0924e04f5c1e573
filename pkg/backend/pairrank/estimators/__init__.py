# Numerical estimators
