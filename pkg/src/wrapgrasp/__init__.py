"""wrapgrasp: planar continuum-arm wrapping grasps.

Modules:
    curves    -- boundary curves, closest-point queries, arm centerlines
    contact   -- reduced contact kinematics (shadow-curve formulation)
    pmp       -- optimal curvature profiles via forward-backward sweeps
    quality   -- grasp maps, Gramian eigenanalysis, quality maps
    feedback  -- curvature feedback law, equilibria, Lyapunov checks
    scenario  -- config parsing for the command-line front end
    tables    -- CSV artifacts with exact float round-tripping
    render    -- deterministic SVG figures
    cli       -- scenario-driven command-line interface
"""

__version__ = "0.1.0"
