# Orlicz Stokes Lab
