from setuptools import find_packages, setup

setup(
    name='randqb',
    version='0.1.0',
    packages=find_packages(exclude=['test', 'test.*']),
    python_requires='>=3.12',
    license='mit',
    description='Randomized blocked QB factorizations with adaptive rank, post-processing and an experiment harness',
    extras_require={
        'base': (base := ['annotated-types', 'numpy', 'pydantic']),
        'requirements': (requirements := base),
        'test': (test := requirements + ['pytest', 'pytest-cov']),
    },
    install_requires=base,
    entry_points={
        'console_scripts': ['randqb = randqb.__main__:main'],
    },
)
