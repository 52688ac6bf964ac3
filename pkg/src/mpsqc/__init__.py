"""mpsqc: compile matrix product states into quantum circuits and verify them.

Subpackages are organized by pipeline stage:

* ``tensor``     -- dense tensor contraction and matrix factorizations
* ``mps``        -- MPS data model, canonical forms, overlaps, compression
* ``models``     -- Hamiltonian builders, exact diagonalization, Trotter layers
* ``dmrg``       -- two-site DMRG with sequential excited-state search
* ``circuits``   -- gate and circuit data model with JSON serialization
* ``compiler``   -- isometry embedding, gate decomposition, boundary encoding
* ``decompose``  -- variational SO(4)-ladder optimization (torch backend)
* ``simulator``  -- exact statevector execution, post-selection, observables
* ``cli``        -- batch experiment harness
"""

__version__ = "0.1.0"
