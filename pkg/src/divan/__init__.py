"""divan: equidepth-binned 3D group-by cubes, rendered and ranked.

The pipeline: ingest a columnar dataset and argsort each dimension once
(`dataset`), map dimensions to B equidepth bins (`binning`), compute all
C(N,3) dense B^3 aggregate cubes on a multithreaded CPU (`aggregate`) or a
simulated processing-in-memory array (`plan` + `pimsim`), turn cubes into
over/under-representation heatmaps (`viz`), order them (`rank`), and serve
the result to a gallery UI (`pipeline` + `service`).
"""

__version__ = "0.1.0"
